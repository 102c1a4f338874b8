use std::path::Path;

use glyphpair::config::RunConfig;
use glyphpair::error::exit;
use glyphpair::manifest::{load_manifest, load_manifest_unchecked, parse_manifest, save_manifest};
use glyphpair_core::corpus::VocabHeader;
use glyphpair_core::{Corpus, LabelKind, PairRecord, Vocabulary};
use proptest::prelude::*;

fn label() -> impl Strategy<Value = Option<String>> {
    prop::option::of("[a-z]{1,4}")
}

fn records() -> impl Strategy<Value = Vec<PairRecord>> {
    prop::collection::vec(
        (
            label(),
            label(),
            label(),
            prop::option::of("[A-Za-z ]{0,8}"),
        ),
        1..12,
    )
    .prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (shape, period, sub, source))| PairRecord {
                id: format!("rec-{i}"),
                image_path: format!("/data/img/{i}.png"),
                drawing_path: format!("/data/draw/{i}.png"),
                shape_label: shape,
                period_label: period.clone(),
                subperiod_label: if period.is_some() { sub } else { None },
                source,
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn manifests_round_trip(recs in records(), explicit in any::<bool>()) {
        let header = explicit.then(|| {
            let mut seen: Vec<String> = recs.iter().filter_map(|r| r.period_label.clone()).collect();
            seen.sort();
            seen.dedup();
            seen.reverse();
            VocabHeader { period: Some(Vocabulary::new(seen)), ..VocabHeader::default() }
        });
        let corpus = Corpus::new(recs, header.as_ref()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.jsonl");
        save_manifest(&corpus, &path).unwrap();
        let back = load_manifest_unchecked(&path).unwrap();
        prop_assert_eq!(&back, &corpus);
        prop_assert_eq!(back.vocab(LabelKind::Period), corpus.vocab(LabelKind::Period));
    }
}

#[test]
fn relative_paths_resolve_against_the_manifest_directory() {
    let text = r#"{"id":"a","image_path":"im/a.png","drawing_path":"dr/a.png","shape_label":"x"}"#;
    let c = parse_manifest(text, Path::new("/base"), Path::new("/base/m.jsonl")).unwrap();
    assert_eq!(c.records()[0].image_path, "/base/im/a.png");
    assert_eq!(c.records()[0].drawing_path, "/base/dr/a.png");
}

#[test]
fn malformed_lines_name_the_line() {
    let text = "{\"id\":\"a\",\"image_path\":\"a\",\"drawing_path\":\"b\"}\n{not json\n";
    let e = parse_manifest(text, Path::new("."), Path::new("m.jsonl")).unwrap_err();
    assert_eq!(e.exit_code(), exit::DATA);
    assert!(e.to_string().contains("m.jsonl:2"), "{e}");
}

#[test]
fn duplicate_ids_are_rejected() {
    let line = r#"{"id":"a","image_path":"a","drawing_path":"b"}"#;
    let e =
        parse_manifest(&format!("{line}\n{line}\n"), Path::new("."), Path::new("m")).unwrap_err();
    assert_eq!(e.exit_code(), exit::DATA);
}

#[test]
fn missing_images_fail_the_checked_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.jsonl");
    std::fs::write(
        &path,
        r#"{"id":"a","image_path":"nope.png","drawing_path":"nope.png"}"#,
    )
    .unwrap();
    assert!(load_manifest_unchecked(&path).is_ok());
    let e = load_manifest(&path).unwrap_err();
    assert_eq!(e.exit_code(), exit::DATA);
    assert!(e.to_string().contains("nope.png"), "{e}");
}

#[test]
fn config_rejects_unknown_keys_and_bad_combinations() {
    let bad = |o: &[&str]| {
        let o: Vec<String> = o.iter().map(|s| s.to_string()).collect();
        RunConfig::load(None, &o).unwrap_err().exit_code()
    };
    assert_eq!(bad(&["train.bogus=1"]), exit::USAGE);
    assert_eq!(bad(&["nonsense=1"]), exit::USAGE);
    assert_eq!(bad(&["split.train_fold=2"]), exit::USAGE);
    assert_eq!(
        bad(&["corpus.image_size=32", "train.image_size=64"]),
        exit::USAGE
    );
    assert_eq!(bad(&["noequals"]), exit::USAGE);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "[train]\nepochs = 3\nwhatever = true\n").unwrap();
    assert_eq!(
        RunConfig::load(Some(&path), &[]).unwrap_err().exit_code(),
        exit::USAGE
    );
}

#[test]
fn config_overrides_and_files_compose() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, "[train]\nepochs = 3\nbatch_size = 4\n").unwrap();
    let cfg = RunConfig::load(
        Some(&path),
        &["train.epochs=7".into(), "output_dir=out/x".into()],
    )
    .unwrap();
    assert_eq!((cfg.train.epochs, cfg.train.batch_size), (7, 4));
    assert_eq!(cfg.output_dir, Path::new("out/x"));
    let again: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
    assert_eq!(again, cfg);
}
