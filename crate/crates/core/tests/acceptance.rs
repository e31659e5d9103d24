//! One line per acceptance criterion: PASS/FAIL, the measured figures, the
//! pinned tolerance and the wall time against its budget.

mod common;

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::gradsuite;
use common::oracles::{
    argmax, band_power, butterworth_bandpass_gain, db, power_spectrum, spectral_flatness, tone_amplitude,
};
use sonocl::classical::ClassicalKind;
use sonocl::data::{FocusLevel, Matrix, Parameter, RawRecording, SessionKind, TrialMarker, SAMPLE_RATE};
use sonocl::eval::{
    evaluate, evaluate_plan, pairwise_similarity, stratified_cv, synth_dataset, synth_parameter_dataset,
    ClassicalLearner, CvConfig, Dataset, FeatureKind, FusionLearner, NeuralLearner, SimilarityConfig, SyntheticSpec,
};
use sonocl::features::{welch_band_psd, CloughTocher, BANDS};
use sonocl::neural::{Arch, TrainConfig, Variant};
use sonocl::preprocess::{preprocess_recording, FilterSpec, PreprocessConfig, SosFilter};
use sonocl::stimulus::{synth_audiocomb, synth_noise, synth_pitch, synth_rough, CARRIER_HZ};
use sonocl::{default_layout, Epoch, EpochLabels};

const FS: f64 = SAMPLE_RATE;
const PLANTED_SEED: u64 = 7;

// Planted-signal schedule. Classical learners and the shuffled control run
// the full 10x5 CV; the fusion comparison runs 2x5 so the target stays
// within budget on a single core.
const FUSION_REPETITIONS: usize = 2;
const SVM_F1_MIN: f64 = 0.90;
const FUSION_MARGIN_MIN: f64 = 0.02;
const CHANCE_BAND: (f64, f64) = (0.35, 0.65);

// Similarity schedule.
const SIM_PER_PARAMETER: usize = 40;
const SIM_REPETITIONS: usize = 2;
const DISSIMILAR_MAX: f64 = 0.1;
const SIMILAR_MIN: f64 = 0.4;
/// Same-label pairs allowed under `SIMILAR_MIN`, as many as the reference
/// table shows.
const SAME_LABEL_ANOMALIES: usize = 2;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn run(filter: Option<&str>, name: &str, budget: Duration, check: impl FnOnce() -> Outcome) -> Option<bool> {
    if filter.is_some_and(|f| !name.contains(f)) {
        return None;
    }
    let t = Instant::now();
    let o = check();
    let took = t.elapsed();
    let in_time = took <= budget;
    let pass = o.pass && in_time;
    println!(
        "{} {name}: {} [{:.1}s of {}s]",
        if pass { "PASS" } else { "FAIL" },
        o.detail,
        took.as_secs_f64(),
        budget.as_secs()
    );
    Some(pass)
}

fn sine(f: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| (2.0 * PI * f * i as f64 / FS).sin()).collect()
}

fn labels() -> EpochLabels {
    EpochLabels {
        cl_label: None,
        parameter: Parameter::Noise,
        focus_level: FocusLevel::new(5).unwrap(),
        session: SessionKind::IR,
        participant: "a".into(),
    }
}

fn dsp() -> Outcome {
    let spec = FilterSpec::default();
    let filter = SosFilter::butterworth_bandpass(spec).unwrap();
    let n = (400.0 * FS) as usize;
    let mut worst_db: f64 = 0.0;
    for f in [1.0, 10.0, 40.0] {
        let x = sine(f, n);
        let y = filter.filter(&x);
        let tail = n / 2..n;
        let gain = tone_amplitude(&y[tail.clone()], f, FS) / tone_amplitude(&x[tail], f, FS);
        let want = butterworth_bandpass_gain(f, FS, spec.low_hz, spec.high_hz, spec.order);
        worst_db = worst_db.max((db(gain) - db(want)).abs());
    }

    let len = 10 * 400 + 400;
    let data = Matrix::from_fn(14, len, |r, c| 40.0 * (2.0 * PI * 60.0 * c as f64 / FS + r as f64).sin());
    let markers = (0..10)
        .map(|i| TrialMarker {
            onset: 200 + 400 * i,
            parameter: Parameter::Rough,
            focus_level: FocusLevel::new(2).unwrap(),
            session: SessionKind::IR,
            participant: "a".into(),
            response: None,
            latency_ms: None,
        })
        .collect();
    let rec = RawRecording::new(data, markers).unwrap();
    let (epochs, _) = preprocess_recording(&rec, &PreprocessConfig::default()).unwrap();
    let atten = epochs
        .iter()
        .flat_map(|e| (0..14).map(move |ch| -db(tone_amplitude(e.stimulus.row(ch), 60.0, FS) / 40.0)))
        .fold(f64::INFINITY, f64::min);

    let stim = Matrix::from_fn(14, 256, |_, c| (2.0 * PI * 10.0 * c as f64 / FS).sin());
    let psd = welch_band_psd(&Epoch::new(Matrix::zeros(14, 64), stim, labels()).unwrap());
    let alpha = psd.get(0, 2) / (0..BANDS.len()).map(|b| psd.get(0, b)).sum::<f64>();

    outcome(
        worst_db <= 0.5 && atten >= 40.0 && alpha >= 0.9 && epochs.len() == 10,
        format!(
            "response error {worst_db:.3} dB (<= 0.5) at 1/10/40 Hz, 60 Hz down {atten:.1} dB (>= 40), alpha share {alpha:.3} (>= 0.90)"
        ),
    )
}

fn stimuli() -> Outcome {
    const SR: u32 = 44_100;
    const PITCH: [f64; 10] = [261.63, 329.63, 392.00, 440.00, 523.25, 659.25, 783.99, 880.00, 1046.50, 1318.51];
    const RATES: [f64; 10] = [70.0, 49.0, 34.0, 23.0, 16.0, 11.0, 7.0, 4.0, 2.0, 0.0];
    let mut passed = 0;
    let mut failures = Vec::new();
    for level in 1..=10u8 {
        let a = synth_pitch(level, SR, 2.0).unwrap();
        let p = power_spectrum(&a.samples);
        let bin = SR as f64 / a.samples.len() as f64;
        let peak = argmax(&p) as f64 * bin;
        if (peak - PITCH[level as usize - 1]).abs() <= bin {
            passed += 1;
        } else {
            failures.push(format!("pitch L{level}"));
        }

        let a = synth_rough(level, SR, 2.0).unwrap();
        let p = power_spectrum(&a.samples);
        let n = a.samples.len();
        let fm = RATES[level as usize - 1];
        let carrier = band_power(&p, n, SR as f64, CARRIER_HZ, bin);
        let ok = if fm == 0.0 {
            carrier / p.iter().sum::<f64>() > 0.999
        } else {
            [CARRIER_HZ - fm, CARRIER_HZ + fm]
                .iter()
                .all(|&f| (band_power(&p, n, SR as f64, f, bin) / carrier - 0.25).abs() < 0.02)
        };
        if ok {
            passed += 1;
        } else {
            failures.push(format!("rough L{level}"));
        }
    }

    let flat: Vec<f64> = (1..=10)
        .map(|l| spectral_flatness(&synth_noise(l, SR, 2.0, 3).unwrap().samples))
        .collect();
    for l in 0..10 {
        // Level 10 is judged against level 9 from below, the rest from above.
        let ok = if l < 9 { flat[l] > flat[l + 1] } else { flat[l] < flat[l - 1] };
        if ok {
            passed += 1;
        } else {
            failures.push(format!("noise L{}", l + 1));
        }
    }

    let pure = synth_rough(10, SR, 2.0).unwrap();
    for level in 1..=10u8 {
        let a = synth_audiocomb(level, SR, 2.0, 3).unwrap();
        let ok = if level == 10 {
            a.samples.iter().zip(&pure.samples).all(|(x, y)| x.to_bits() == y.to_bits())
        } else {
            let sq: Vec<f64> = a.samples.iter().map(|x| x * x).collect();
            let mean = sq.iter().sum::<f64>() / sq.len() as f64;
            let p = power_spectrum(&sq.iter().map(|x| x - mean).collect::<Vec<_>>());
            let bin = SR as f64 / sq.len() as f64;
            let k = argmax(&p[1..(150.0 / bin) as usize]) + 1;
            (k as f64 * bin - RATES[level as usize - 1]).abs() <= 1.0
        };
        if ok {
            passed += 1;
        } else {
            failures.push(format!("audiocomb L{level}"));
        }
    }
    outcome(
        passed == 40,
        format!(
            "{passed}/40 stimuli pass (pitch peak +-1 bin, sidebands 1000+-fm at -6 dB +-0.02, flatness monotone, AudioComb envelope +-1 Hz and L10 bit-equal){}",
            if failures.is_empty() { String::new() } else { format!(", failed: {}", failures.join(" ")) }
        ),
    )
}

fn interpolation() -> Outcome {
    let layout = default_layout();
    let ct = CloughTocher::new(&layout.coords2d).unwrap();
    let values: Vec<f64> = (0..14).map(|i| (i as f64 * 1.3).cos() * 4.0).collect();
    let node_err = ct
        .interpolate(&values, &layout.coords2d)
        .unwrap()
        .iter()
        .zip(&values)
        .map(|(g, v)| g.map_or(f64::INFINITY, |g| (g - v).abs()))
        .fold(0.0, f64::max);
    let f = |p: [f64; 2]| 2.5 * p[0] - 1.5 * p[1] + 0.7;
    let linear: Vec<f64> = layout.coords2d.iter().map(|&p| f(p)).collect();
    let r = layout.coords2d.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max);
    let n = 81;
    let grid: Vec<[f64; 2]> = (0..n * n)
        .map(|k| [-r + 2.0 * r * (k / n) as f64 / (n - 1) as f64, -r + 2.0 * r * (k % n) as f64 / (n - 1) as f64])
        .collect();
    let mut inside = 0;
    let mut lin_err: f64 = 0.0;
    for (p, g) in grid.iter().zip(ct.interpolate(&linear, &grid).unwrap()) {
        if let Some(g) = g {
            inside += 1;
            lin_err = lin_err.max((g - f(*p)).abs());
        }
    }
    outcome(
        node_err <= 1e-9 && lin_err <= 1e-6 && inside > 0,
        format!("electrode error {node_err:.1e} (<= 1e-9), linear-field error {lin_err:.1e} (<= 1e-6) over {inside} hull points"),
    )
}

fn autodiff() -> Outcome {
    let mut worst = ("", 0.0f64);
    let mut names = Vec::new();
    for (name, e) in gradsuite::primitives() {
        names.push(name.to_string());
        if e > worst.1 {
            worst = (name, e);
        }
    }
    let mut arch_worst = (String::new(), 0.0f64);
    for arch in gradsuite::classifier_archs() {
        let e = gradsuite::architecture(arch);
        if e > arch_worst.1 {
            arch_worst = (arch.to_string(), e);
        }
    }
    let e = gradsuite::siamese();
    if e > arch_worst.1 {
        arch_worst = ("siamese".into(), e);
    }
    let pass = worst.1 <= gradsuite::TOL && arch_worst.1 <= gradsuite::TOL;
    outcome(
        pass,
        format!(
            "{} primitive groups, worst {} {:.1e}; 12 architectures, worst {} {:.1e} (<= 1e-4)",
            names.len(),
            worst.0,
            worst.1,
            arch_worst.0,
            arch_worst.1
        ),
    )
}

fn planted_dataset(kinds: &[FeatureKind]) -> Dataset {
    let spec = SyntheticSpec {
        effect: 0.8,
        n_epochs: 400,
        seed: PLANTED_SEED,
        ..Default::default()
    };
    Dataset::from_epochs(&synth_dataset(&spec).unwrap(), kinds, &default_layout()).unwrap()
}

fn planted() -> Outcome {
    let data = planted_dataset(&[FeatureKind::Psd, FeatureKind::Raw, FeatureKind::Topo]);
    let full = CvConfig { seed: 1, ..Default::default() };
    let svm = ClassicalLearner::new(ClassicalKind::SvmRbf, FeatureKind::Psd);
    let svm_f1 = evaluate(&svm, &data, &full).unwrap().primary().f1;
    let shuffled = evaluate(&svm, &data.shuffled(11).unwrap(), &full).unwrap().primary().f1;

    let fusion = FusionLearner::default();
    let report = evaluate(&fusion, &data, &CvConfig { repetitions: FUSION_REPETITIONS, ..full }).unwrap();
    let f = |name: &str| report.head(name).unwrap().f1;
    let (fused, temporal, spatial) = (f("fusion"), f("eegnet/raw"), f("topo-a/topo"));
    let margin = fused.mean - temporal.mean.max(spatial.mean);

    let pass = svm_f1.mean >= SVM_F1_MIN
        && margin >= FUSION_MARGIN_MIN
        && (CHANCE_BAND.0..=CHANCE_BAND.1).contains(&shuffled.mean);
    outcome(
        pass,
        format!(
            "svm-rbf {svm_f1} (>= {SVM_F1_MIN:.2}, 10x5); fusion {fused} vs eegnet {temporal} / topo-a {spatial}, margin {margin:+.3} (>= {FUSION_MARGIN_MIN}, {FUSION_REPETITIONS}x5); shuffled {shuffled} (in [{:.2}, {:.2}])",
            CHANCE_BAND.0, CHANCE_BAND.1
        ),
    )
}

fn similarity() -> Outcome {
    let spec = SyntheticSpec { seed: PLANTED_SEED, ..Default::default() };
    let epochs = synth_parameter_dataset(&spec, SIM_PER_PARAMETER).unwrap();
    let data = Dataset::from_epochs(&epochs, &[FeatureKind::Topo], &default_layout()).unwrap();
    let cfg = SimilarityConfig {
        cv: CvConfig { seed: 1, repetitions: SIM_REPETITIONS, k: 5 },
        ..Default::default()
    };
    let report = pairwise_similarity(&data, &cfg).unwrap();
    let mut cross_worst: f64 = 0.0;
    let mut same_worst: f64 = 1.0;
    let mut anomalies = Vec::new();
    let mut cross = 0;
    for row in &report.rows {
        if row.labels.0 != row.labels.1 {
            cross += 1;
            cross_worst = cross_worst.max(row.score.mean);
        } else {
            same_worst = same_worst.min(row.score.mean);
            if row.score.mean < SIMILAR_MIN {
                anomalies.push(format!("{}-{}", row.a, row.b));
            }
        }
    }
    let high_low_ok = cross == 8 && cross_worst <= DISSIMILAR_MAX;
    let pass = report.rows.len() == 15 && high_low_ok && anomalies.len() <= SAME_LABEL_ANOMALIES;
    outcome(
        pass,
        format!(
            "{cross} High-Low pairs, max score {cross_worst:.3} (<= {DISSIMILAR_MAX}); same-label min {same_worst:.3} (>= {SIMILAR_MIN}, {} below{}); {SIM_PER_PARAMETER}/parameter, {SIM_REPETITIONS}x5",
            anomalies.len(),
            if anomalies.is_empty() { String::new() } else { format!(": {}", anomalies.join(" ")) }
        ),
    )
}

fn harness() -> Outcome {
    let mut partition_ok = true;
    let mut plans = 0;
    for seed in 0..20u64 {
        for k in [2, 3, 5, 10] {
            let n_high = 20 + (seed as usize * 7) % 40;
            let n_low = 10 + (seed as usize * 3) % 25;
            let labels: Vec<usize> = (0..n_high + n_low).map(|i| (i % 2 == 1 || i >= 2 * n_low) as usize).collect();
            let plan = stratified_cv(&labels, k, 3, seed).unwrap();
            plans += 1;
            for rep in 0..3 {
                let mut count = vec![0; labels.len()];
                for f in plan.folds.iter().filter(|f| f.repetition == rep) {
                    f.test.iter().for_each(|&i| count[i] += 1);
                    partition_ok &= f.train.len() + f.test.len() == labels.len();
                }
                partition_ok &= count.iter().all(|&c| c == 1);
            }
        }
    }

    let data = planted_dataset(&[FeatureKind::Psd, FeatureKind::Topo]).subset(&(0..120).collect::<Vec<_>>());
    let plan = stratified_cv(&data.labels, 5, 1, 3).unwrap();
    let neural = NeuralLearner {
        arch: Arch::Topo(Variant::D),
        feature: FeatureKind::Topo,
        train: TrainConfig { max_epochs: 1, ..Default::default() },
    };
    let classical = ClassicalLearner::new(ClassicalKind::Lda, FeatureKind::Psd);
    let mut leak_free = true;
    let mut audited = 0;
    let mut identical = true;
    for learner in [&classical as &dyn sonocl::eval::Learner, &neural] {
        let (a, audits) = evaluate_plan(learner, &data, &plan).unwrap();
        let (b, _) = evaluate_plan(learner, &data, &plan).unwrap();
        identical &= serde_json::to_string(&a).unwrap() == serde_json::to_string(&b).unwrap();
        for (audit, fold) in audits.iter().zip(&plan.folds) {
            audited += 1;
            leak_free &= audit.fit_accessed.iter().all(|i| fold.train.contains(i));
            leak_free &= audit.predict_accessed.iter().all(|i| fold.test.contains(i));
        }
    }
    outcome(
        partition_ok && leak_free && identical,
        format!(
            "partition holds on {plans} plans; {audited} runs audited, leakage {}; repeated reports {}",
            if leak_free { "none" } else { "found" },
            if identical { "byte-identical" } else { "differ" }
        ),
    )
}

fn main() -> ExitCode {
    // Optional substring filter on the criterion name; other arguments
    // passed by the test runner are ignored.
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let filter = filter.as_deref();
    let secs = Duration::from_secs;
    let results: Vec<bool> = [
        run(filter, "dsp oracle suite", secs(10), dsp),
        run(filter, "stimulus verification", secs(30), stimuli),
        run(filter, "interpolation oracle", secs(5), interpolation),
        run(filter, "autodiff suite", secs(300), autodiff),
        run(filter, "planted-signal recovery", secs(1800), planted),
        run(filter, "similarity structure", secs(2700), similarity),
        run(filter, "harness invariants", secs(120), harness),
    ]
    .into_iter()
    .flatten()
    .collect();
    let passed = results.iter().filter(|&&p| p).count();
    println!("{passed}/{} acceptance criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
