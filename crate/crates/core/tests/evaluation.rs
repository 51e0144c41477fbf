use std::collections::BTreeSet;

use kgqa::eval::{question_text, synth_dataset, EvalReport, QuestionRecord, SynthConfig};
use kgqa::kg::{shortest_path_relations, EntityId, PathConfig, RelationId};

fn e(i: u32) -> EntityId {
    EntityId(i)
}

/// Ten hand-scored questions at threshold 0.2:
/// (ranked, gold, covered, expected hit, expected F1).
#[allow(clippy::type_complexity)]
fn fixture() -> Vec<(Vec<(EntityId, f64)>, Vec<EntityId>, bool, bool, f64)> {
    vec![
        (vec![(e(1), 0.9), (e(2), 0.1)], vec![e(1)], true, true, 1.0),
        (vec![(e(2), 0.6), (e(1), 0.3)], vec![e(1)], true, false, 2.0 / 3.0),
        (vec![(e(3), 0.5), (e(4), 0.5)], vec![e(3), e(4)], true, true, 1.0),
        (vec![(e(5), 0.15), (e(6), 0.1)], vec![e(6)], true, false, 0.0),
        (vec![], vec![e(7)], false, false, 0.0),
        (vec![(e(1), 0.9)], vec![], true, false, 0.0),
        (vec![(e(8), 0.4), (e(9), 0.3), (e(1), 0.3)], vec![e(8), e(9), e(2)], true, true, 2.0 / 3.0),
        (vec![(e(4), 1.0)], vec![e(4)], true, true, 1.0),
        (vec![(e(0), 0.25), (e(1), 0.25)], vec![e(1)], false, false, 2.0 / 3.0),
        (vec![(e(2), 0.05)], vec![], true, false, 1.0),
    ]
}

fn records() -> Vec<QuestionRecord> {
    fixture()
        .iter()
        .enumerate()
        .map(|(i, (ranked, gold, covered, _, _))| {
            QuestionRecord::score(format!("q{i}"), ranked, gold, 0.2, *covered, ranked.len())
        })
        .collect()
}

#[test]
fn hand_scored_fixture() {
    let recs = records();
    for (r, (_, _, _, hit, f1)) in recs.iter().zip(fixture()) {
        assert_eq!(r.hit, hit, "{}", r.id);
        assert!((r.f1 - f1).abs() < 1e-12, "{}: {} vs {f1}", r.id, r.f1);
    }
    let report = EvalReport::from_records(recs, 0.2, "fp".into(), 0);
    assert!((report.hits_at_1 - 0.4).abs() < 1e-12);
    assert!((report.f1 - 0.6).abs() < 1e-12);
    assert!((report.coverage_rate - 0.8).abs() < 1e-12);
    // empty ranking, and empty gold twice
    assert_eq!(report.flagged, 3);
}

#[test]
fn reports_are_reproducible() {
    let a = serde_json::to_string(&EvalReport::from_records(records(), 0.2, "fp".into(), 7)).unwrap();
    let b = serde_json::to_string(&EvalReport::from_records(records(), 0.2, "fp".into(), 7)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn weak_supervision_recovers_planted_relations() {
    let ds = synth_dataset(&SynthConfig::default()).unwrap();
    assert_eq!(ds.kg.num_entities(), 500);
    for q in ds.all() {
        let found = shortest_path_relations(&ds.kg, q, PathConfig::default());
        let topic = ds.kg.entity_label(q.topic_entities[0]);
        let template = ds
            .templates
            .iter()
            .find(|t| {
                let idx: Vec<usize> = t.iter().map(|r| r.0 as usize / 2).collect();
                question_text(&idx, topic) == q.question
            })
            .unwrap_or_else(|| panic!("{} matches no template", q.id));
        assert_eq!(template.len(), 2);
        let planted: BTreeSet<RelationId> = template.iter().copied().collect();
        assert_eq!(found, planted, "{}", q.id);
    }
}
