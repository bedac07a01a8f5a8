use fractvox::audio::{AudioClip, decode_wav, encode_pcm16, encode_wav};
use fractvox::dataset::{read_features_from, write_features_to};
use fractvox::eval::synth_corpus;
use fractvox::model::{
    BaggingParams, BaseKind, Classifier, ModelFile, MlpParams, OneClassParams, SavedModel, train_bagging, train_mlp,
    train_one_class,
};
use fractvox::signals::{SpeechStyle, speech_like};

#[test]
fn wav_round_trip_within_quantization() {
    let x = speech_like(SpeechStyle::fluent(), 0.5, 16_000, 1);
    let clip = AudioClip::new(x.clone(), 16_000, "s").unwrap();
    let back = decode_wav(&encode_wav(&clip).unwrap(), "s").unwrap();
    assert_eq!(back.sample_rate_hz(), 16_000);
    assert_eq!(back.len(), x.len());
    assert!(back.samples().iter().zip(&x).all(|(a, b)| (a - b).abs() <= 1.0 / 32768.0));
}

#[test]
fn stereo_is_averaged() {
    let left = vec![0.5; 100];
    let right = vec![-0.25; 100];
    let clip = decode_wav(&encode_pcm16(&[&left, &right], 8000).unwrap(), "st").unwrap();
    assert!(clip.samples().iter().all(|v| (v - 0.125).abs() < 1e-4));
}

#[test]
fn feature_csv_round_trip_is_exact() {
    let table = synth_corpus(12, 4, 7, 1.5, 3);
    let mut buf = Vec::new();
    write_features_to(&mut buf, &table).unwrap();
    let back = read_features_from(buf.as_slice()).unwrap();
    assert_eq!(back.columns, table.columns);
    assert_eq!(back.len(), table.len());
    for (a, b) in back.instances.iter().zip(&table.instances) {
        assert_eq!(a.values, b.values);
        assert_eq!(a.stage, b.stage);
    }
    let mut again = Vec::new();
    write_features_to(&mut again, &back).unwrap();
    assert_eq!(buf, again);
}

fn assert_same_predictions(a: &SavedModel, b: &SavedModel, rows: &[Vec<f64>]) {
    for x in rows {
        let (p, q) = match (a, b) {
            (SavedModel::Mlp(a), SavedModel::Mlp(b)) => (a.predict_proba(x).unwrap(), b.predict_proba(x).unwrap()),
            (SavedModel::Bagging(a), SavedModel::Bagging(b)) => {
                (a.predict_proba(x).unwrap(), b.predict_proba(x).unwrap())
            }
            (SavedModel::OneClass(a), SavedModel::OneClass(b)) => {
                assert_eq!(a.threshold, b.threshold);
                (vec![a.score(x).unwrap()], vec![b.score(x).unwrap()])
            }
            _ => panic!("model kind changed"),
        };
        assert!(p.iter().zip(&q).all(|(u, v)| (u - v).abs() <= 1e-12));
    }
}

#[test]
fn model_files_round_trip() {
    let table = synth_corpus(20, 10, 3, 2.0, 8);
    let rows: Vec<Vec<f64>> = table.instances.iter().map(|i| i.values.clone()).collect();
    let labels: Vec<usize> = table.binary_labels().iter().map(|l| l.index()).collect();
    let names = vec!["CR".to_string(), "AD".to_string()];
    let cr: Vec<Vec<f64>> = rows[..20].to_vec();
    let models = [
        SavedModel::Mlp(train_mlp(&rows, &labels, &names, &MlpParams::default(), 1).unwrap()),
        SavedModel::Bagging(train_bagging(&rows, &labels, &names, &BaggingParams::default(), 1).unwrap()),
        SavedModel::OneClass(train_one_class(&cr, "CR", &OneClassParams::new(BaseKind::Mlp), 1).unwrap()),
        SavedModel::OneClass(train_one_class(&cr, "CR", &OneClassParams::new(BaseKind::Bagging), 1).unwrap()),
    ];
    let dir = tempfile::tempdir().unwrap();
    for (i, model) in models.into_iter().enumerate() {
        let file = ModelFile::new(table.columns.iter().map(|c| c.name.clone()).collect(), model);
        let path = dir.path().join(format!("m{i}.json"));
        file.save(&path).unwrap();
        let back = ModelFile::load(&path).unwrap();
        assert_eq!(back, file);
        assert_same_predictions(&file.model, &back.model, &rows);
    }
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"format":"other","feature_schema":"x","feature_names":[],"model":{"kind":"constant","class":0,"class_names":[],"n_attributes":0}}"#).unwrap();
    assert!(ModelFile::load(&bad).is_err());
}
