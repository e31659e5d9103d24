use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sonocl::classical::{ClassicalKind, ClassicalModel};
use sonocl::data::{read_epochs, read_recording, read_recording_with_markers, write_container, write_epochs, ContainerHeader};
use sonocl::eval::{
    apply_labels, compute_features, evaluate, mapping_accuracy, pairwise_similarity, report, sub_session_labels,
    synth_dataset, synth_parameter_dataset, ClassicalLearner, CvConfig, Dataset, FeatureKind, FusionLearner, Learner,
    NeuralLearner, TLX_THRESHOLD,
};
use sonocl::features::Normalizer;
use sonocl::neural::{build, save_checkpoint, train_classifier, Arch, Model, TrainReport, Variant};
use sonocl::session::ExportBundle;
use sonocl::stimulus::{blur_image, starfield, synthesize, write_pgm, write_wav, DEFAULT_SAMPLE_RATE, STIMULUS_DURATION_S};
use sonocl::{default_layout, Epoch, Parameter};

use crate::config::{required, usage, Config};
use crate::*;

/// Side length of the synthesized visual stimuli.
pub const IMAGE_SIZE: usize = 256;

pub fn dispatch(command: Command, config: &Config) -> anyhow::Result<()> {
    match command {
        Command::Synth(a) => synth(a, config),
        Command::Preprocess(a) => preprocess(a, config),
        Command::Features(a) => features(a, config),
        Command::Train(a) => train(a, config),
        Command::Eval(a) => eval(a, config),
        Command::Similarity(a) => similarity(a, config),
        Command::Simulate(a) => simulate(a, config),
        Command::Mapping(a) => mapping(a, config),
        Command::Serve(a) => server::serve_blocking(a, config),
    }
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn parameters(name: &str) -> anyhow::Result<Vec<Parameter>> {
    if name.eq_ignore_ascii_case("all") {
        return Ok(Parameter::ALL.to_vec());
    }
    Parameter::ALL
        .iter()
        .find(|p| p.slug().eq_ignore_ascii_case(name) || p.to_string().eq_ignore_ascii_case(name))
        .map(|p| vec![*p])
        .ok_or_else(|| usage(format!("unknown parameter {name:?}")))
}

fn synth(a: SynthArgs, config: &Config) -> anyhow::Result<()> {
    let params = parameters(&required(a.param, &config.param, "param")?)?;
    let out = required(a.out, &config.output, "out")?;
    let sample_rate = a.sample_rate.or(config.sample_rate).unwrap_or(DEFAULT_SAMPLE_RATE);
    let seed = a.seed.or(config.seed).unwrap_or(0);
    let size = config.image_size.unwrap_or(IMAGE_SIZE);
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut written: Vec<PathBuf> = Vec::new();
    for p in params {
        let base = p.has_image().then(|| starfield(size, size, seed));
        for level in 1..=10u8 {
            if let Some(audio) = synthesize(p, level, sample_rate, STIMULUS_DURATION_S, seed)? {
                let path = out.join(format!("{}_{level:02}.wav", p.slug()));
                write_wav(&audio, &path)?;
                written.push(path);
            }
            if let Some(img) = &base {
                let path = out.join(format!("{}_{level:02}.pgm", p.slug()));
                write_pgm(&blur_image(img, level)?, &path)?;
                written.push(path);
            }
        }
    }
    write_json(&serde_json::json!({ "files": written }), None)
}

fn preprocess(a: PreprocessArgs, config: &Config) -> anyhow::Result<()> {
    let input = required(a.input, &config.input, "input")?;
    let out = required(a.out, &config.output, "out")?;
    let rec = match a.markers.or_else(|| config.markers.clone()) {
        Some(m) => read_recording_with_markers(&input, &m)?,
        None => read_recording(&input)?,
    };
    let (mut epochs, rejection) = sonocl::preprocess::preprocess_recording(&rec, &config.preprocess)?;
    let bundle_paths = if a.bundles.is_empty() { config.bundles.clone() } else { a.bundles };
    let threshold = config.tlx_threshold.unwrap_or(TLX_THRESHOLD);
    let mut labelled = 0;
    for path in &bundle_paths {
        let labels = sub_session_labels(&read_bundle(path)?, threshold)?;
        labelled += apply_labels(&mut epochs, &labels);
    }
    write_epochs(&epochs, &out)?;
    write_json(
        &serde_json::json!({
            "epochs": epochs.len(),
            "labelled": labelled,
            "rejection": rejection,
        }),
        None,
    )
}

fn read_bundle(path: &Path) -> anyhow::Result<ExportBundle> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing bundle {}", path.display()))
}

fn features(a: FeaturesArgs, config: &Config) -> anyhow::Result<()> {
    let input = required(a.input, &config.input, "input")?;
    let kind = required(a.feature, &config.feature, "feature")?;
    let out = required(a.out, &config.output, "out")?;
    let epochs = read_epochs(&input)?;
    let rows = compute_features(&epochs, kind, &default_layout())?;
    let width = rows.first().map(Vec::len).unwrap_or(0);
    let mut header = ContainerHeader::new("features", rows.len(), vec![width]);
    header.labels = epochs.iter().map(|e| e.labels.clone()).collect();
    header.meta.insert("feature".into(), kind.as_str().into());
    write_container(&out, &header, &rows.concat())?;
    write_json(&serde_json::json!({ "feature": kind, "count": rows.len(), "width": width }), None)
}

/// A classifier chosen by name on the command line.
enum Choice {
    Classical(ClassicalKind),
    Neural(Arch),
    Fusion,
}

fn choose(name: &str) -> anyhow::Result<Choice> {
    if name.eq_ignore_ascii_case("fusion") {
        return Ok(Choice::Fusion);
    }
    if let Ok(k) = name.parse::<ClassicalKind>() {
        return Ok(Choice::Classical(k));
    }
    match name.parse::<Arch>() {
        Ok(Arch::FusionMlp) => Ok(Choice::Fusion),
        Ok(Arch::Siamese) => Err(usage("the Siamese network is trained by `similarity`")),
        Ok(a) => Ok(Choice::Neural(a)),
        Err(_) => Err(usage(format!("unknown classifier {name:?}"))),
    }
}

/// Representation a network consumes when none is given.
fn native_feature(arch: Arch) -> FeatureKind {
    match arch {
        Arch::Cnn1d | Arch::EegNet => FeatureKind::Raw,
        Arch::Spect(_) => FeatureKind::Spect,
        _ => FeatureKind::Topo,
    }
}

fn check_feature(arch: Arch, feature: FeatureKind) -> anyhow::Result<()> {
    if native_feature(arch) != feature {
        return Err(usage(format!("{arch} takes {} input, not {feature}", native_feature(arch))));
    }
    Ok(())
}

fn labelled_dataset(input: &Path, kinds: &[FeatureKind]) -> anyhow::Result<Dataset> {
    let epochs: Vec<Epoch> = read_epochs(input)?;
    Ok(Dataset::from_epochs(&epochs, kinds, &default_layout())?)
}

#[derive(Serialize)]
struct ClassicalArtifact<'a> {
    learner: String,
    feature: FeatureKind,
    normalizer: &'a Normalizer,
    model: &'a ClassicalModel,
}

#[derive(Serialize)]
struct NeuralSidecar<'a> {
    arch: String,
    feature: FeatureKind,
    normalizer: &'a Normalizer,
    report: &'a TrainReport,
}

fn train(a: TrainArgs, config: &Config) -> anyhow::Result<()> {
    let input = required(a.input, &config.input, "input")?;
    let out = required(a.out, &config.output, "out")?;
    let seed = a.seed.or(config.seed).unwrap_or(0);
    let choice = choose(&required(a.arch, &config.arch, "arch")?)?;
    let feature = a.feature.or(config.feature);
    match choice {
        Choice::Fusion => Err(usage("fusion is a cross-validated pipeline; run it with `eval`")),
        Choice::Classical(kind) => {
            let feature = feature.unwrap_or(FeatureKind::Psd);
            let data = labelled_dataset(&input, &[feature])?;
            let rows = data.rows(feature)?;
            let normalizer = Normalizer::fit(rows)?;
            let x = normalizer.apply_all(rows)?;
            let model = ClassicalModel::fit(kind, &x, &data.labels, &config.classical)?;
            write_json(
                &ClassicalArtifact {
                    learner: kind.to_string(),
                    feature,
                    normalizer: &normalizer,
                    model: &model,
                },
                Some(&out),
            )
        }
        Choice::Neural(arch) => {
            let feature = feature.unwrap_or(native_feature(arch));
            check_feature(arch, feature)?;
            let data = labelled_dataset(&input, &[feature])?;
            let rows = data.rows(feature)?;
            let normalizer = Normalizer::fit(rows)?;
            let x = normalizer.apply_all(rows)?;
            let slices: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
            let mut model = Model::new(build(arch, seed)?)?;
            let report = train_classifier(&mut model, &slices, &data.labels, &config.train.clone().unwrap_or_default().with_seed(seed))?;
            save_checkpoint(&model, &out)?;
            let sidecar = sidecar_path(&out);
            write_json(
                &NeuralSidecar {
                    arch: arch.to_string(),
                    feature,
                    normalizer: &normalizer,
                    report: &report,
                },
                Some(&sidecar),
            )?;
            write_json(&report, None)
        }
    }
}

/// `model.snld` → `model.snld.json`
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn eval(a: EvalArgs, config: &Config) -> anyhow::Result<()> {
    let input = required(a.input, &config.input, "input")?;
    let choice = choose(&required(a.arch, &config.arch, "arch")?)?;
    let feature = a.feature.or(config.feature);
    let cv = CvConfig {
        k: a.k.unwrap_or(config.cv.k),
        repetitions: a.repetitions.unwrap_or(config.cv.repetitions),
        seed: a.seed.or(config.seed).unwrap_or(config.cv.seed),
    };
    let (learner, kinds): (Box<dyn Learner>, Vec<FeatureKind>) = match choice {
        Choice::Classical(kind) => {
            let feature = feature.unwrap_or(FeatureKind::Psd);
            let mut l = ClassicalLearner::new(kind, feature);
            l.config = config.classical;
            (Box::new(l), vec![feature])
        }
        Choice::Neural(arch) => {
            let feature = feature.unwrap_or(native_feature(arch));
            check_feature(arch, feature)?;
            let l = NeuralLearner {
                arch,
                feature,
                train: config.train.clone().unwrap_or_default(),
            };
            (Box::new(l), vec![feature])
        }
        Choice::Fusion => {
            let spatial = match feature.unwrap_or(FeatureKind::Topo) {
                FeatureKind::Topo => (Arch::Topo(Variant::A), FeatureKind::Topo),
                FeatureKind::Spect => (Arch::Spect(Variant::A), FeatureKind::Spect),
                other => return Err(usage(format!("fusion needs a topo or spect spatial stream, not {other}"))),
            };
            let defaults = FusionLearner::default();
            let l = FusionLearner {
                spatial,
                encoder_train: config.train.clone().unwrap_or(defaults.encoder_train),
                head_train: config.head_train.clone().unwrap_or(defaults.head_train),
                ..defaults
            };
            let kinds = vec![l.temporal.1, spatial.1];
            (Box::new(l), kinds)
        }
    };
    let mut data = labelled_dataset(&input, &kinds)?;
    if a.shuffle_labels || config.shuffle_labels {
        data = data.shuffled(cv.seed)?;
    }
    let report = evaluate(learner.as_ref(), &data, &cv)?;
    if a.table {
        print!("{}", report::metrics_table(&[&report]));
    }
    if a.out.is_some() || config.output.is_some() || !a.table {
        write_json(&report, a.out.or_else(|| config.output.clone()).as_deref())?;
    }
    Ok(())
}

fn similarity(a: SimilarityArgs, config: &Config) -> anyhow::Result<()> {
    let input = required(a.input, &config.input, "input")?;
    let data = labelled_dataset(&input, &[FeatureKind::Topo])?;
    let mut cfg = config.similarity.clone();
    if let Some(seed) = a.seed.or(config.seed) {
        cfg.cv.seed = seed;
    }
    let report = pairwise_similarity(&data, &cfg)?;
    if a.table {
        print!("{}", report::similarity_table(&report));
    }
    if a.out.is_some() || config.output.is_some() || !a.table {
        write_json(&report, a.out.or_else(|| config.output.clone()).as_deref())?;
    }
    Ok(())
}

fn simulate(a: SimulateArgs, config: &Config) -> anyhow::Result<()> {
    let out = required(a.out, &config.output, "out")?;
    let mut spec = config.synthetic.clone();
    if let Some(v) = a.effect {
        spec.effect = v;
    }
    if let Some(v) = a.n {
        spec.n_epochs = v;
    }
    if let Some(v) = a.balance {
        spec.balance = v;
    }
    if let Some(v) = a.seed.or(config.seed) {
        spec.seed = v;
    }
    let epochs = match a.per_parameter {
        Some(n) => synth_parameter_dataset(&spec, n)?,
        None => synth_dataset(&spec)?,
    };
    write_epochs(&epochs, &out)?;
    write_json(&serde_json::json!({ "epochs": epochs.len(), "spec": spec }), None)
}

fn mapping(a: MappingArgs, config: &Config) -> anyhow::Result<()> {
    let paths = if a.bundles.is_empty() { config.bundles.clone() } else { a.bundles };
    if paths.is_empty() {
        return Err(usage("missing --bundle"));
    }
    let bundles = paths.iter().map(|p| read_bundle(p)).collect::<anyhow::Result<Vec<_>>>()?;
    let report = mapping_accuracy(&bundles)?;
    if a.table {
        print!("{}", report::mapping_table(&report));
    }
    if a.out.is_some() || config.output.is_some() || !a.table {
        write_json(&report, a.out.or_else(|| config.output.clone()).as_deref())?;
    }
    Ok(())
}
