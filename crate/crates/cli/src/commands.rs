//! One function per subcommand. Each reads its inputs, runs the library
//! stage and stages reports into [`Outputs`]; nothing touches the output
//! directory until the command has succeeded.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use invscore::analysis::{
    ablate, build_scenario_grid, cluster_drivers, crash_probabilities, default_combos, default_transitions,
    expected_levels, factor_prevalence, risk_multipliers, scenario_inputs, score_distribution, sensitivity,
    simulate_impact, single_group_configs, top_pairs, validate_by_scenario_type, CompositeWeights,
    DistributionReport, ScenarioGrid, ScenarioGridSpec, ScoreDistribution,
};
use invscore::codes::CodeMap;
use invscore::explain::{
    consensus_rank, impurity_importance, permutation_importance, ranking_csv_rows, recommend, shap_importance,
    PermutationMetric, Recommendation, ShapExplainer,
};
use invscore::fixture::{crash_fixture, planted_dataset, trajectory_fixture};
use invscore::forest::{io as model_io, load_model, train_forest, Forest};
use invscore::ingest::kinematics::{load_trajectories, write_trajectories};
use invscore::ingest::records::write_crash_records;
use invscore::ingest::{
    base_record, build_dataset, load_conditions, load_crash_records, stratified_sample, stratified_split,
    synthesize_safe_samples, write_conditions, CrashRecord, FeatureEngineer, IngestReport, LabeledDataset,
    LoadReport, ScenarioType, SynthReport,
};
use invscore::metrics::{
    confusion, cross_validate, ordinal_confusion, pr_metrics, roc_auc, roc_curve, threshold_labels,
    ConfusionSummary, CvReport, OrdinalConfusion,
};
use invscore::schema::FeatureSchema;
use invscore::scoring::{assess_batch, CalibrationTable, CompiledCalibration, RiskBands};
use invscore::types::{Classifier, Label, RiskLevel, SafetyAssessment};
use serde::Serialize;

use crate::config::{stream, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::Outputs;

/// Decision threshold on p_crash for accuracy and confusion counts.
const DECISION_THRESHOLD: f64 = 0.5;

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn engineer(cfg: &RunConfig, out: &mut Outputs) -> CliResult<FeatureEngineer> {
    let schema = match &cfg.paths.schema {
        Some(p) => {
            out.input(p);
            FeatureSchema::load(p).map_err(CliError::config)?
        }
        None => FeatureSchema::default_crss(),
    };
    let codes = match &cfg.paths.codes {
        Some(p) => {
            out.input(p);
            CodeMap::load(p).map_err(CliError::config)?
        }
        None => CodeMap::default_crss(),
    };
    Ok(FeatureEngineer::new(Arc::new(schema), codes, cfg.engineering.clone()))
}

fn calibration(cfg: &RunConfig, e: &FeatureEngineer, out: &mut Outputs) -> CliResult<(CompiledCalibration, RiskBands)> {
    let table = match &cfg.paths.calibration {
        Some(p) => {
            out.input(p);
            CalibrationTable::load(p).map_err(CliError::config)?
        }
        None => CalibrationTable::default_table(),
    };
    let bands = match &cfg.paths.bands {
        Some(p) => {
            out.input(p);
            RiskBands::load(p).map_err(CliError::config)?
        }
        None => RiskBands::default(),
    };
    Ok((table.compile(e.schema()).map_err(CliError::config)?, bands))
}

fn model(cfg: &RunConfig, e: &FeatureEngineer, out: &mut Outputs) -> CliResult<Forest> {
    let path = cfg.require(&cfg.paths.model, "a model file (--model or paths.model)")?;
    out.input(path);
    let m = load_model(path)?;
    let schema_id = e.schema().schema_id();
    if m.schema_id != *schema_id || m.n_features != e.schema().len() {
        return Err(CliError::Config(format!(
            "model was trained on schema `{}` ({} features), configured schema is `{schema_id}` ({} features)",
            m.schema_id,
            m.n_features,
            e.schema().len()
        )));
    }
    Ok(m)
}

fn records(cfg: &RunConfig, e: &FeatureEngineer, out: &mut Outputs) -> CliResult<(Vec<CrashRecord>, LoadReport)> {
    let path = cfg.require(&cfg.paths.crashes, "a crash-record CSV (--input or paths.crashes)")?;
    out.input(path);
    let (records, report) = load_crash_records(path, &e.schema().raw_columns(), e.codes())?;
    if !report.row_errors.is_empty() {
        log::warn!("{}: skipped {} malformed rows", path.display(), report.row_errors.len());
    }
    if records.is_empty() {
        return Err(CliError::Data(format!("{} holds no usable records", path.display())));
    }
    Ok((records, report))
}

fn crash_rows(records: &[CrashRecord]) -> Vec<CrashRecord> {
    records.iter().filter(|r| r.label == Label::Crash).cloned().collect()
}

/// Records with both classes. Inputs holding crashes only get synthetic safe
/// counterparts.
fn with_safe(cfg: &RunConfig, e: &FeatureEngineer, records: Vec<CrashRecord>) -> CliResult<(Vec<CrashRecord>, Option<SynthReport>)> {
    if records.iter().any(|r| r.label == Label::Safe) {
        return Ok((records, None));
    }
    let (safe, report) =
        synthesize_safe_samples(&records, &cfg.synth, e.codes(), e.config(), cfg.stream_seed(stream::SYNTH))?;
    let mut all = records;
    all.extend(safe);
    Ok((all, Some(report)))
}

fn labeled_dataset(
    cfg: &RunConfig,
    e: &FeatureEngineer,
    out: &mut Outputs,
) -> CliResult<(LabeledDataset, Option<SynthReport>)> {
    let (recs, _) = records(cfg, e, out)?;
    let (all, synth) = with_safe(cfg, e, recs)?;
    let (data, _) = build_dataset(e, &all)?;
    Ok((data, synth))
}

fn record_columns(records: &[CrashRecord]) -> Vec<String> {
    let set: BTreeSet<&String> = records.iter().flat_map(|r| r.fields.keys()).collect();
    set.into_iter().cloned().collect()
}

fn grid(cfg: &RunConfig, e: &FeatureEngineer, out: &mut Outputs) -> CliResult<ScenarioGrid> {
    let spec = match &cfg.paths.grid {
        Some(p) => {
            out.input(p);
            let text = std::fs::read_to_string(p)
                .map_err(|err| CliError::Config(format!("cannot read {}: {err}", p.display())))?;
            serde_json::from_str::<ScenarioGridSpec>(&text)
                .map_err(|err| CliError::Config(format!("{}: {err}", p.display())))?
        }
        None => ScenarioGridSpec::default(),
    };
    spec.validate(e).map_err(CliError::config)?;
    build_scenario_grid(&spec, e).map_err(CliError::config)
}

fn assessed_grid(
    cfg: &RunConfig,
    out: &mut Outputs,
) -> CliResult<(FeatureEngineer, ScenarioGrid, Vec<SafetyAssessment>, DistributionReport)> {
    let e = engineer(cfg, out)?;
    let m = model(cfg, &e, out)?;
    let (cal, bands) = calibration(cfg, &e, out)?;
    let g = grid(cfg, &e, out)?;
    let assessments = assess_batch(&m, &cal, &bands, &g.contexts())?;
    let dist = score_distribution(&g, &assessments)?;
    Ok((e, g, assessments, dist))
}

fn write_records(out: &mut Outputs, name: &str, records: &[CrashRecord]) -> CliResult<()> {
    let columns = record_columns(records);
    out.with_writer(name, |w| write_crash_records(w, records, &columns))
}

// ---------------------------------------------------------------- fixture

#[derive(Serialize)]
struct FixtureSummary {
    crash_records: usize,
    scenarios: BTreeMap<&'static str, usize>,
    planted_rows: usize,
    planted_features: usize,
}

pub fn fixture(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let e = engineer(cfg, out)?;
    let crashes = crash_fixture(&cfg.fixture.crashes, e.schema())?;
    write_records(out, "crashes.csv", &crashes)?;

    let tf = trajectory_fixture(&cfg.fixture.trajectories)?;
    out.with_writer("trajectories.csv", |w| write_trajectories(w, &tf.scenarios))?;
    out.with_writer("conditions.csv", |w| write_conditions(w, &tf.conditions))?;

    let planted = planted_dataset(&cfg.fixture.planted)?;
    out.with_writer("planted.csv", |w| planted.write_csv(w))?;

    let mut scenarios = BTreeMap::new();
    for k in &tf.kinds {
        *scenarios.entry(k.name()).or_insert(0) += 1;
    }
    out.json(
        "fixture.json",
        &FixtureSummary {
            crash_records: crashes.len(),
            scenarios,
            planted_rows: planted.len(),
            planted_features: planted.n_features(),
        },
    )
}

// ----------------------------------------------------------------- ingest

#[derive(Serialize)]
struct IngestSummary {
    #[serde(flatten)]
    report: IngestReport,
    prevalence: invscore::analysis::PrevalenceReport,
}

pub fn ingest(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let e = engineer(cfg, out)?;
    let (recs, load) = records(cfg, &e, out)?;
    let (data, unknown_codes) = build_dataset(&e, &recs)?;
    out.with_writer("dataset.csv", |w| data.write_csv(w))?;
    let crashes = crash_rows(&recs);
    out.json(
        "ingest.json",
        &IngestSummary {
            report: IngestReport {
                load,
                unknown_codes,
                synthesis: None,
                crash_rows: data.count(Label::Crash),
                safe_rows: data.count(Label::Safe),
            },
            prevalence: factor_prevalence(&crashes, &e),
        },
    )
}

// ------------------------------------------------------------------ synth

#[derive(Serialize)]
struct SynthSummary {
    crash_rows: usize,
    safe_rows: usize,
    #[serde(flatten)]
    report: SynthReport,
}

pub fn synth(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let e = engineer(cfg, out)?;
    let (recs, _) = records(cfg, &e, out)?;
    let crashes = crash_rows(&recs);
    if crashes.is_empty() {
        return Err(CliError::Data("input holds no crash rows to synthesize from".into()));
    }
    let (safe, report) =
        synthesize_safe_samples(&crashes, &cfg.synth, e.codes(), e.config(), cfg.stream_seed(stream::SYNTH))?;
    let summary = SynthSummary {
        crash_rows: crashes.len(),
        safe_rows: safe.len(),
        report,
    };
    let mut all = crashes;
    all.extend(safe);
    write_records(out, "records.csv", &all)?;
    out.json("synth.json", &summary)
}

// ------------------------------------------------------------------ train

#[derive(Serialize)]
struct TrainReport {
    schema_id: String,
    n_features: usize,
    n_train: usize,
    n_test: usize,
    trees: usize,
    train_auc: f64,
    test_auc: f64,
    train_accuracy: f64,
    test_accuracy: f64,
    /// Train minus test accuracy, in percentage points.
    accuracy_gap_percent: f64,
    oob_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    synthesis: Option<SynthReport>,
}

fn accuracy(model: &Forest, data: &LabeledDataset) -> CliResult<(f64, f64)> {
    let p = model.predict_rows(data);
    let auc = roc_auc(&p, &data.labels)?;
    let m = confusion(&threshold_labels(&p, DECISION_THRESHOLD), &data.labels)?;
    Ok((auc, m.accuracy().unwrap_or(0.0)))
}

pub fn train(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let e = engineer(cfg, out)?;
    let (data, synthesis) = labeled_dataset(cfg, &e, out)?;
    let (train_set, test_set) = stratified_split(&data, cfg.test_fraction, cfg.stream_seed(stream::SPLIT))?;
    log::info!("training {} trees on {} rows", cfg.forest.n_estimators, train_set.len());
    let m = train_forest(&train_set, &cfg.forest)?;
    let (train_auc, train_acc) = accuracy(&m, &train_set)?;
    let (test_auc, test_acc) = accuracy(&m, &test_set)?;
    out.bytes("model.json", model_io::to_json(&m)?.into_bytes());
    out.json(
        "train.json",
        &TrainReport {
            schema_id: m.schema_id.clone(),
            n_features: m.n_features,
            n_train: train_set.len(),
            n_test: test_set.len(),
            trees: m.trees.len(),
            train_auc,
            test_auc,
            train_accuracy: train_acc,
            test_accuracy: test_acc,
            accuracy_gap_percent: 100.0 * (train_acc - test_acc),
            oob_estimate: m.training_meta.oob_estimate,
            synthesis,
        },
    )
}

// --------------------------------------------------------------- evaluate

#[derive(Serialize)]
struct EvaluateReport {
    n_test: usize,
    auc: f64,
    average_precision: f64,
    decision_threshold: f64,
    confusion: ConfusionSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    cv: Option<CvReport>,
}

pub fn evaluate(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let e = engineer(cfg, out)?;
    let m = model(cfg, &e, out)?;
    let (data, _) = labeled_dataset(cfg, &e, out)?;
    let (_, test) = stratified_split(&data, cfg.test_fraction, cfg.stream_seed(stream::SPLIT))?;
    let p = m.predict_rows(&test);
    let auc = roc_auc(&p, &test.labels)?;
    let pr = pr_metrics(&p, &test.labels)?;
    let cm = confusion(&threshold_labels(&p, DECISION_THRESHOLD), &test.labels)?;
    let cv = if cfg.cv.enabled {
        log::info!("cross-validating: {} folds x {} seeds", cfg.cv.folds, cfg.cv.seeds.len());
        Some(cross_validate(&data, cfg.cv.folds, &cfg.cv.seeds, &cfg.forest)?)
    } else {
        None
    };
    let roc = roc_curve(&p, &test.labels)?;
    out.csv(
        "roc.csv",
        &["threshold", "fpr", "tpr"],
        roc.iter().map(|r| [fmt(r.threshold), fmt(r.fpr), fmt(r.tpr)]),
    )?;
    out.json(
        "evaluate.json",
        &EvaluateReport {
            n_test: test.len(),
            auc,
            average_precision: pr.average_precision,
            decision_threshold: DECISION_THRESHOLD,
            confusion: cm.summary(),
            cv,
        },
    )
}

// ------------------------------------------------------------------ score

#[derive(Serialize)]
struct ScoreReport {
    n: usize,
    calibrated: ScoreDistribution,
    raw: ScoreDistribution,
    levels: BTreeMap<&'static str, usize>,
}

pub fn score(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let e = engineer(cfg, out)?;
    let m = model(cfg, &e, out)?;
    let (cal, bands) = calibration(cfg, &e, out)?;
    let (recs, _) = records(cfg, &e, out)?;
    let (contexts, _) = e.engineer_all(&recs)?;
    let assessments = assess_batch(&m, &cal, &bands, &contexts)?;
    out.csv(
        "scores.csv",
        &["casenum", "label", "raw_score", "calibrated_score", "risk_level", "penalties"],
        recs.iter().zip(&assessments).map(|(r, a)| {
            let penalties: Vec<String> = a.applied_penalties.iter().map(|p| format!("{}:{}", p.rule_id, p.alpha)).collect();
            [
                r.casenum.clone(),
                r.label.as_u8().to_string(),
                fmt(a.raw_score),
                fmt(a.calibrated_score),
                a.risk_level.name().to_string(),
                penalties.join(";"),
            ]
        }),
    )?;
    let mut levels: BTreeMap<&'static str, usize> = RiskLevel::ALL.iter().map(|l| (l.name(), 0)).collect();
    for a in &assessments {
        *levels.entry(a.risk_level.name()).or_insert(0) += 1;
    }
    let cal_scores: Vec<f64> = assessments.iter().map(|a| a.calibrated_score).collect();
    let raw_scores: Vec<f64> = assessments.iter().map(|a| a.raw_score).collect();
    out.json(
        "score.json",
        &ScoreReport {
            n: assessments.len(),
            calibrated: ScoreDistribution::of(&cal_scores)?,
            raw: ScoreDistribution::of(&raw_scores)?,
            levels,
        },
    )
}

// ---------------------------------------------------------------- explain

#[derive(Serialize)]
struct Contribution {
    feature: String,
    value: f64,
    phi: f64,
}

#[derive(Serialize)]
struct LocalExplanation {
    casenum: String,
    assessment: SafetyAssessment,
    base_value: f64,
    model_output: f64,
    /// Largest |φ| first, at most ten.
    top_contributions: Vec<Contribution>,
    recommendations: Vec<Recommendation>,
}

const TOP_CONTRIBUTIONS: usize = 10;

pub fn explain(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let e = engineer(cfg, out)?;
    let m = model(cfg, &e, out)?;
    let (cal, bands) = calibration(cfg, &e, out)?;
    let (recs, _) = records(cfg, &e, out)?;
    let (all, _) = with_safe(cfg, &e, recs.clone())?;
    let (data, _) = build_dataset(&e, &all)?;
    let (_, test) = stratified_split(&data, cfg.test_fraction, cfg.stream_seed(stream::SPLIT))?;
    let background = stratified_sample(&data, cfg.explain.background, cfg.stream_seed(stream::BACKGROUND));
    let explainer = ShapExplainer::new(&m, &background)?;
    let names = e.schema().names();

    let local_recs = &recs[..cfg.explain.rows.min(recs.len())];
    let (contexts, _) = e.engineer_all(local_recs)?;
    let assessments = assess_batch(&m, &cal, &bands, &contexts)?;
    let shap = explainer.explain_batch(&contexts)?;
    let mut local = Vec::with_capacity(contexts.len());
    for ((r, ctx), (a, s)) in local_recs.iter().zip(&contexts).zip(assessments.into_iter().zip(&shap)) {
        let mut idx: Vec<usize> = (0..s.contributions.len()).collect();
        idx.sort_by(|&i, &j| s.contributions[j].abs().total_cmp(&s.contributions[i].abs()).then(i.cmp(&j)));
        let top_contributions = idx
            .into_iter()
            .take(TOP_CONTRIBUTIONS)
            .map(|i| Contribution {
                feature: names[i].to_string(),
                value: ctx.values[i],
                phi: s.contributions[i],
            })
            .collect();
        local.push(LocalExplanation {
            casenum: r.casenum.clone(),
            assessment: a,
            base_value: s.base_value,
            model_output: s.model_output,
            top_contributions,
            recommendations: recommend(s, &cal, &e, ctx)?,
        });
    }

    log::info!("global importance on {} held-out rows", test.len());
    let impurity = impurity_importance(&m, &names);
    let permutation = permutation_importance(
        &m,
        &test,
        PermutationMetric::Auc,
        cfg.explain.permutation_repeats,
        cfg.stream_seed(stream::PERMUTATION),
    )?;
    let shap_sample = stratified_sample(&test, cfg.explain.shap_rows, cfg.stream_seed(stream::BACKGROUND) ^ 1);
    let shap_global = shap_importance(&explainer.explain_batch(&shap_sample.contexts)?, &names);
    let rankings = [impurity, permutation, shap_global];
    let consensus = consensus_rank(&rankings)?;

    out.json("explanations.json", &local)?;
    out.csv("importance.csv", &["feature", "method", "score", "rank"], ranking_csv_rows(&rankings))?;
    out.json("consensus.json", &consensus)
}

// ------------------------------------------------------------------- grid

#[derive(Serialize)]
struct GridReport {
    cells: usize,
    distribution: DistributionReport,
    ordinal: OrdinalConfusion,
    expected_rules: invscore::analysis::ExpectedLevelRules,
}

pub fn grid_cmd(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let (e, g, assessments, dist) = assessed_grid(cfg, out)?;
    let expected = expected_levels(&g, &cfg.expected, &e)?;
    let predicted: Vec<RiskLevel> = assessments.iter().map(|a| a.risk_level).collect();
    let ordinal = ordinal_confusion(&predicted, &expected)?;

    let mut header: Vec<&str> = vec!["cell"];
    header.extend(g.spec.factors.iter().map(|f| f.name.as_str()));
    header.extend(["raw_score", "calibrated_score", "risk_level", "expected_level"]);
    let rows: Vec<Vec<String>> = g
        .cells
        .iter()
        .zip(&assessments)
        .zip(&expected)
        .map(|((c, a), x)| {
            let mut row = vec![c.index.to_string()];
            row.extend((0..g.spec.factors.len()).map(|f| g.level_name(c, f).to_string()));
            row.extend([
                fmt(a.raw_score),
                fmt(a.calibrated_score),
                a.risk_level.name().to_string(),
                x.name().to_string(),
            ]);
            row
        })
        .collect();
    out.csv("grid.csv", &header, rows)?;
    out.json(
        "grid.json",
        &GridReport {
            cells: g.len(),
            distribution: dist,
            ordinal,
            expected_rules: cfg.expected.clone(),
        },
    )
}

// ------------------------------------------------------------ sensitivity

#[derive(Serialize)]
struct SensitivityReport {
    /// Grid calibrated-score standard deviation used for effect sizes.
    sigma: f64,
    rows: Vec<invscore::analysis::SensitivityRow>,
}

pub fn sensitivity_cmd(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let e = engineer(cfg, out)?;
    let m = model(cfg, &e, out)?;
    let (cal, bands) = calibration(cfg, &e, out)?;
    let g = grid(cfg, &e, out)?;
    let assessments = assess_batch(&m, &cal, &bands, &g.contexts())?;
    let sigma = score_distribution(&g, &assessments)?.calibrated.std;
    let rows = sensitivity(&m, &cal, &bands, &e, &base_record("baseline"), &default_transitions(), sigma)?;
    out.csv(
        "sensitivity.csv",
        &["factor", "transition", "score_before", "score_after", "delta", "effect_size", "raw_delta"],
        rows.iter().map(|r| {
            [
                r.factor.clone(),
                r.transition.clone(),
                fmt(r.score_before),
                fmt(r.score_after),
                fmt(r.delta),
                opt(r.effect_size),
                fmt(r.raw_delta),
            ]
        }),
    )?;
    out.json("sensitivity.json", &SensitivityReport { sigma, rows })
}

// ----------------------------------------------------------------- impact

pub fn impact(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let (_, _, assessments, _) = assessed_grid(cfg, out)?;
    let probs = crash_probabilities(&assessments);
    let report = simulate_impact(&assessments, &probs, &cfg.impact.thresholds, cfg.impact.compliance)?;
    out.csv(
        "impact.csv",
        &["threshold", "flagged", "flagged_percent", "reduction_percent"],
        report.rows.iter().map(|r| {
            [
                fmt(r.threshold),
                r.flagged.to_string(),
                fmt(r.flagged_percent),
                fmt(r.reduction_percent),
            ]
        }),
    )?;
    out.json("impact.json", &report)
}

// --------------------------------------------------------------- validate

#[derive(Serialize)]
struct ValidateSummary {
    scenarios: usize,
    conditions_file: bool,
    #[serde(flatten)]
    report: invscore::analysis::ValidationReport,
}

pub fn validate(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let e = engineer(cfg, out)?;
    let m = model(cfg, &e, out)?;
    let tpath = cfg.require(&cfg.paths.trajectories, "a trajectory CSV (--trajectories or paths.trajectories)")?;
    out.input(tpath);
    let scenarios = load_trajectories(tpath)?;
    let conditions = match &cfg.paths.conditions {
        Some(_) => {
            let p = cfg.require(&cfg.paths.conditions, "a conditions CSV")?;
            out.input(p);
            Some(load_conditions(p)?)
        }
        None => None,
    };
    let inputs = scenario_inputs(&e, &scenarios, conditions.as_ref(), &cfg.kinematics)?;
    let pairs: Vec<(invscore::types::DrivingContext, ScenarioType)> =
        inputs.iter().map(|i| (i.context.clone(), i.scenario_type)).collect();
    let report = validate_by_scenario_type(&m, &pairs)?;
    let rows = inputs
        .iter()
        .map(|i| {
            let p = m.predict_proba(&i.context)?.p_crash;
            Ok([
                i.scenario_id.clone(),
                i.scenario_type.name().to_string(),
                fmt(p),
                fmt(i.features.min_ttc),
                fmt(i.features.min_inter_agent_distance),
                fmt(i.features.max_speed),
            ])
        })
        .collect::<CliResult<Vec<_>>>()?;
    out.csv(
        "scenarios.csv",
        &["scenario_id", "scenario_type", "p_crash", "min_ttc", "min_distance", "max_speed"],
        rows,
    )?;
    out.json(
        "validation.json",
        &ValidateSummary {
            scenarios: inputs.len(),
            conditions_file: conditions.is_some(),
            report,
        },
    )
}

// ----------------------------------------------------------------- ablate

pub fn ablate_cmd(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let e = engineer(cfg, out)?;
    let (data, _) = labeled_dataset(cfg, &e, out)?;
    let seed = cfg.stream_seed(stream::SPLIT);
    let singles = single_group_configs(&data.schema);
    log::info!("ablating {} configurations", singles.len());
    let mut report = ablate(&data, &singles, &cfg.forest, cfg.test_fraction, seed)?;
    let pairs = top_pairs(&report, &singles, cfg.ablation_top_pairs);
    if !pairs.is_empty() {
        let paired = ablate(&data, &pairs, &cfg.forest, cfg.test_fraction, seed)?;
        report.rows.extend(paired.rows);
    }
    let mut rows = vec![&report.baseline];
    rows.extend(&report.rows);
    out.csv(
        "ablation.csv",
        &["configuration", "n_features", "auc", "delta_auc_percent"],
        rows.iter()
            .map(|r| [r.name.clone(), r.n_features.to_string(), fmt(r.auc), fmt(r.delta_auc_percent)]),
    )?;
    out.json("ablation.json", &report)
}

// ---------------------------------------------------------------- cluster

pub fn cluster(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let e = engineer(cfg, out)?;
    let weights = match &cfg.paths.composites {
        Some(p) => {
            out.input(p);
            let text = std::fs::read_to_string(p)
                .map_err(|err| CliError::Config(format!("cannot read {}: {err}", p.display())))?;
            CompositeWeights::from_json(&text).map_err(CliError::config)?
        }
        None => CompositeWeights::default(),
    };
    let (recs, _) = records(cfg, &e, out)?;
    let crashes = crash_rows(&recs);
    let report = cluster_drivers(&crashes, &e, &weights, &cfg.cluster)?;
    out.csv(
        "profiles.csv",
        &["casenum", "aggression", "risk_taking", "cluster_id", "cluster_label"],
        report.profiles.iter().map(|p| {
            [
                p.casenum.clone(),
                fmt(p.aggression),
                fmt(p.risk_taking),
                p.cluster_id.to_string(),
                p.cluster_label.clone(),
            ]
        }),
    )?;
    #[derive(Serialize)]
    struct Summary<'a> {
        params: &'a invscore::analysis::KMeansParams,
        weights: CompositeWeights,
        clusters: &'a [invscore::analysis::ClusterSummary],
        inertia_history: &'a [f64],
        converged: bool,
    }
    out.json(
        "cluster.json",
        &Summary {
            params: &report.params,
            weights,
            clusters: &report.clusters,
            inertia_history: &report.inertia_history,
            converged: report.converged,
        },
    )
}

// ------------------------------------------------------------ multipliers

pub fn multipliers(cfg: &RunConfig, out: &mut Outputs) -> CliResult<()> {
    let e = engineer(cfg, out)?;
    let (recs, _) = records(cfg, &e, out)?;
    let crashes = crash_rows(&recs);
    let (all, _) = with_safe(cfg, &e, recs)?;
    let (exposure, _) = build_dataset(&e, &all)?;
    let report = risk_multipliers(&crashes, &e, &exposure, &default_combos())?;
    out.csv(
        "multipliers.csv",
        &["combo", "support", "crashes", "crash_rate", "multiplier"],
        report.rows.iter().map(|r| {
            [
                r.combo.clone(),
                r.support.to_string(),
                r.crashes.to_string(),
                opt(r.crash_rate),
                opt(r.multiplier),
            ]
        }),
    )?;
    out.json("multipliers.json", &report)
}

