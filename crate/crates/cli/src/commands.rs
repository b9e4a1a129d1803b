use std::path::{Path, PathBuf};
use std::time::Duration;

use mentalgen_core::classifier::{train_intent_model, GammaMode, IntentModel, Prediction, TrainConfig};
use mentalgen_core::ingest::{load_dataset, load_recording, save_dataset, synth_generate, SynthSpec, DATASET_FILE};
use mentalgen_core::pipeline::{command_training_set, extract, window_features, PipelineConfig};
use mentalgen_core::signal::{EegRecording, SpatialFeature};
use mentalgen_core::study::{cluster_study, StudyConfig, StudyReport};
use mentalgen_session::engine::select_candidate;
use mentalgen_session::gateway::{render_base_image, MockGenerator};
use mentalgen_session::{
    play_round, session_report, replay_log, ArtifactStore, DesignSession, PromptCorpus, Recorder, SessionConfig,
    SessionLog,
};
use mentalgen_service::ServiceConfig;
use ndarray::s;
use serde::Serialize;
use serde_json::json;

use crate::args::*;
use crate::error::CliError;
use crate::policy::RatingPolicy;
use crate::provenance::Provenance;

pub const SESSION_LOG: &str = "session.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "simulate.json";

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("output serializes");
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn load_pipeline(args: &PipelineArgs, prov: &mut Provenance) -> Result<PipelineConfig, CliError> {
    let Some(path) = &args.pipeline else {
        return Ok(PipelineConfig::default());
    };
    prov.input(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
        let at = line.map(|l| format!(" line {l}")).unwrap_or_default();
        CliError::new("config", format!("{}{at}: {}", path.display(), e.message()))
    })
}

fn load_model(path: &Path, pipeline: &PipelineConfig, prov: &mut Provenance) -> Result<IntentModel, CliError> {
    prov.input(path)?;
    let model = IntentModel::load(path)?;
    if model.config_fingerprint != pipeline.fingerprint() {
        return Err(CliError::new(
            "model",
            format!("{} was trained with a different pipeline configuration", path.display()),
        ));
    }
    Ok(model)
}

fn input_dataset(dir: &Path, prov: &mut Provenance) -> Result<mentalgen_core::ingest::LabeledSegmentSet, CliError> {
    let set = load_dataset(dir)?;
    prov.input(&dir.join(DATASET_FILE))?;
    Ok(set)
}

/// The first window of `rec` starting at `offset_s`.
fn window_at(rec: &EegRecording, cfg: &PipelineConfig, offset_s: f64) -> Result<EegRecording, CliError> {
    let fs = rec.sample_rate();
    let need = cfg.window_samples(fs);
    let start = (offset_s * fs).round();
    if !(start >= 0.0) || start as usize + need > rec.n_samples() {
        return Err(CliError::new(
            "input",
            format!("a {} s window at {offset_s} s does not fit in {:.3} s of data", cfg.window_s, rec.duration()),
        ));
    }
    let start = start as usize;
    Ok(rec.with_data(rec.data().slice(s![.., start..start + need]).to_owned()).map_err(|e| CliError::new("input", e.to_string()))?)
}

fn predict(model: &IntentModel, window: &EegRecording, cfg: &PipelineConfig) -> Result<Prediction, CliError> {
    let features = window_features(window, cfg)?.features;
    Ok(model.predict(&features)?)
}

pub fn synth(a: &SynthArgs, seed: u64, argv: &[String]) -> Result<(), CliError> {
    let mut spec = match a.kind {
        SynthKind::Commands => SynthSpec::commands(a.per_class, a.duration, a.noise, seed),
        SynthKind::FiveClusters => SynthSpec::five_clusters(a.per_class, a.duration, a.noise, seed),
    };
    spec.seed = seed;
    let mut set = synth_generate(&spec)?;
    set.participant_id = a.participant.clone();
    save_dataset(&set, &a.out)?;
    write_json(&a.out.join("synth.json"), &json!({ "v": 1, "provenance": Provenance::new(argv, seed), "spec": spec }))?;
    println!("wrote {} segments to {}", set.segments.len(), a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct WindowRow {
    segment: usize,
    start_time: f64,
    label: mentalgen_core::signal::SegmentLabel,
    features: Vec<f64>,
}

pub fn preprocess(a: &PreprocessArgs, seed: u64, argv: &[String]) -> Result<(), CliError> {
    let mut prov = Provenance::new(argv, seed);
    let cfg = load_pipeline(&a.pipeline, &mut prov)?;
    let set = input_dataset(&a.dataset, &mut prov)?;
    let mut windows = Vec::new();
    for (i, seg) in set.segments.iter().enumerate() {
        for w in extract(&seg.recording, &cfg)? {
            windows.push(WindowRow { segment: i, start_time: w.start_time, label: seg.label, features: w.features });
        }
    }
    write_json(
        &a.out,
        &json!({
            "v": 1,
            "provenance": prov,
            "participant_id": set.participant_id,
            "pipeline": cfg,
            "pipeline_fingerprint": cfg.fingerprint(),
            "windows": windows,
        }),
    )?;
    println!("wrote {} windows from {} segments to {}", windows.len(), set.segments.len(), a.out.display());
    Ok(())
}

fn print_study(report: &StudyReport) {
    println!("participants: {}  best k: {}", report.participants.len(), report.best_k);
    println!("{:>3} {:>11} {:>18}", "k", "silhouette", "calinski_harabasz");
    for avg in &report.average {
        println!("{:>3} {:>11.4} {:>18.2}", avg.k, avg.silhouette, avg.calinski_harabasz);
    }
    if let Some(best) = report.average.iter().find(|a| a.k == report.best_k) {
        println!("label agreement at k = {}:", best.k);
        println!("{:<20} {:>8} {:>9} {:>12} {:>12}", "feature", "purity", "v_measure", "homogeneity", "completeness");
        for feature in SpatialFeature::ALL {
            if let Some(sc) = best.features.get(&feature) {
                println!(
                    "{:<20} {:>8.4} {:>9.4} {:>12.4} {:>12.4}",
                    feature.as_str(),
                    sc.weighted_purity,
                    sc.v_measure,
                    sc.homogeneity,
                    sc.completeness
                );
            }
        }
    }
}

pub fn cluster_eval(a: &ClusterEvalArgs, seed: u64, argv: &[String]) -> Result<(), CliError> {
    let mut prov = Provenance::new(argv, seed);
    let cfg = load_pipeline(&a.pipeline, &mut prov)?;
    let sets = a.datasets.iter().map(|d| input_dataset(d, &mut prov)).collect::<Result<Vec<_>, _>>()?;
    let study = StudyConfig { k_min: a.k_min, k_max: a.k_max, seed, ..StudyConfig::default() };
    let report = cluster_study(&sets, &cfg, &study)?;
    print_study(&report);
    if let Some(out) = &a.out {
        write_json(out, &json!({ "v": 1, "provenance": prov, "pipeline_fingerprint": cfg.fingerprint(), "report": report }))?;
    }
    Ok(())
}

fn parse_gamma(text: &str) -> Result<GammaMode, CliError> {
    if text == "scale" {
        return Ok(GammaMode::Scale);
    }
    match text.parse::<f64>() {
        Ok(g) if g > 0.0 && g.is_finite() => Ok(GammaMode::Fixed(g)),
        _ => Err(CliError::new("usage", format!("--gamma must be `scale` or a positive number, got `{text}`"))),
    }
}

pub fn train(a: &TrainArgs, seed: u64, argv: &[String]) -> Result<(), CliError> {
    let gamma = parse_gamma(&a.gamma)?;
    let mut prov = Provenance::new(argv, seed);
    let cfg = load_pipeline(&a.pipeline, &mut prov)?;
    let set = input_dataset(&a.dataset, &mut prov)?;
    let ts = command_training_set(&set, &cfg)?;
    let train = TrainConfig { c: a.c, gamma, folds: a.folds, seed, ..TrainConfig::default() };
    let model = train_intent_model(&ts, &train, &cfg.fingerprint())?;
    model.save(&a.out)?;
    prov.write_sidecar(&a.out)?;
    if let Some(path) = &a.cv_report {
        write_json(
            path,
            &json!({ "v": 1, "provenance": prov, "windows": ts.len(), "class_counts": ts.class_counts(), "cv": model.cv }),
        )?;
    }
    let per: Vec<String> = model.cv.per_command.iter().map(|a| format!("{a:.3}")).collect();
    println!(
        "trained on {} windows; {}-fold cv accuracy {:.4} (per command {})",
        ts.len(),
        model.cv.folds,
        model.cv.overall,
        per.join(", ")
    );
    Ok(())
}

pub fn predict_cmd(a: &PredictArgs, seed: u64, argv: &[String]) -> Result<(), CliError> {
    let mut prov = Provenance::new(argv, seed);
    let cfg = load_pipeline(&a.pipeline, &mut prov)?;
    let model = load_model(&a.model, &cfg, &mut prov)?;
    prov.input(&a.recording)?;
    let rec = load_recording(&a.recording)?;
    let prediction = predict(&model, &window_at(&rec, &cfg, a.offset)?, &cfg)?;
    println!("{}", json!({ "v": 1, "provenance": prov, "prediction": prediction }));
    Ok(())
}

/// One window per round source: each segment's first window, or consecutive
/// windows of a single recording.
fn round_windows(a: &SimulateArgs, cfg: &PipelineConfig, prov: &mut Provenance) -> Result<Vec<EegRecording>, CliError> {
    if let Some(dir) = &a.dataset {
        let set = input_dataset(dir, prov)?;
        return set.segments.iter().map(|seg| window_at(&seg.recording, cfg, 0.0)).collect();
    }
    let path = a.recording.as_ref().expect("clap requires a source");
    prov.input(path)?;
    let rec = load_recording(path)?;
    let n = (rec.duration() / cfg.window_s + 1e-9).floor() as usize;
    if n == 0 {
        return Err(CliError::new("input", format!("{} is shorter than one window", path.display())));
    }
    (0..n).map(|i| window_at(&rec, cfg, i as f64 * cfg.window_s)).collect()
}

#[derive(Serialize)]
struct SimulationSummary {
    v: u32,
    provenance: Provenance,
    session_id: String,
    rounds: usize,
    finalized: bool,
    min_rounds_met: bool,
    log: PathBuf,
    report: PathBuf,
    predictions: Vec<Prediction>,
}

pub fn simulate(a: &SimulateArgs, seed: u64, argv: &[String]) -> Result<(), CliError> {
    if a.rounds == 0 {
        return Err(CliError::new("usage", "--rounds must be at least 1"));
    }
    let mut prov = Provenance::new(argv, seed);
    let cfg = load_pipeline(&a.pipeline, &mut prov)?;
    let model = load_model(&a.model, &cfg, &mut prov)?;
    let windows = round_windows(a, &cfg, &mut prov)?;
    let mut policy = RatingPolicy::new(a.rating_policy, seed, a.script.as_deref())?;
    if let Some(script) = &a.script {
        prov.input(script)?;
    }

    std::fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    let store = ArtifactStore::open(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    let log_path = a.out.join(SESSION_LOG);
    let log = SessionLog::create(&log_path)?;
    let base = store.put(&render_base_image(seed)).map_err(|e| CliError::io(&a.out, e))?;
    let config = SessionConfig { seed, ..SessionConfig::default() };
    let mut recorder = Recorder::start(DesignSession::start_event(&a.session_id, &a.participant, base, config), Some(log))?;
    if a.rounds < recorder.session().config.min_rounds {
        log::warn!("{} rounds is fewer than the session minimum of {}", a.rounds, recorder.session().config.min_rounds);
    }

    let generator = MockGenerator::new(store);
    let corpus = PromptCorpus::default();
    let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build().map_err(|e| CliError::new("internal", e.to_string()))?;
    let mut predictions = Vec::new();
    for i in 0..a.rounds {
        let prediction = predict(&model, &windows[i % windows.len()], &cfg)?;
        predictions.push(prediction.clone());
        let round = runtime
            .block_on(play_round(&mut recorder, prediction, &corpus, &generator, Duration::from_secs(60)))?
            .clone();
        let mut response = policy.rate(&round)?;
        if i + 1 == a.rounds && response.final_mark.is_none() {
            let ratings = response.ratings.as_deref().unwrap_or_default();
            let valid = mentalgen_session::engine::validate_ratings(ratings)?;
            response.final_mark = Some(select_candidate(&valid));
        }
        let outcome = recorder.submit_ratings(response.ratings.as_deref(), response.final_mark)?;
        if outcome.finalized {
            break;
        }
    }

    let session = recorder.session();
    let report = session_report(session)?;
    let report_path = a.out.join(REPORT_FILE);
    std::fs::write(&report_path, format!("{}\n", report.to_json())).map_err(|e| CliError::io(&report_path, e))?;
    let summary = SimulationSummary {
        v: 1,
        provenance: prov,
        session_id: session.session_id.clone(),
        rounds: session.round_index,
        finalized: session.is_finalized(),
        min_rounds_met: session.min_rounds_met(),
        log: log_path,
        report: report_path,
        predictions,
    };
    write_json(&a.out.join(SUMMARY_FILE), &summary)?;
    let means: Vec<String> = report.rounds.iter().map(|r| format!("{:.2}", r.mean)).collect();
    println!("session {} finished after {} rounds; mean rating per round: {}", session.session_id, session.round_index, means.join(" "));
    Ok(())
}

pub fn report(a: &ReportArgs) -> Result<(), CliError> {
    let session = replay_log(&a.log)?;
    println!("{}", session_report(&session)?.to_json());
    Ok(())
}

pub fn serve(a: &ServeArgs) -> Result<(), CliError> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            ServiceConfig::from_toml(&text).map_err(|e| CliError::new("config", format!("{}: {e}", path.display())))?
        }
        None => ServiceConfig::default(),
    };
    cfg.apply_env(|k| std::env::var(k).ok())?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::new("internal", e.to_string()))?;
    runtime.block_on(mentalgen_service::run(cfg)).map_err(|e| CliError::new("service", e.to_string()))
}
