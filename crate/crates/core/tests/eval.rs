use std::collections::BTreeMap;

use proptest::prelude::*;

use rcqa::corpus::{ArticleId, EntityId};
use rcqa::eval::{
    gate_ratio, hits_at_1, precision_at_k, precision_at_k_micro, recall_at_k, write_oracle_dump,
    write_retrieval_dump, ReaderReport, RetrievalReport, DEFAULT_KS, SCHEMA_VERSION,
};
use rcqa::reader::ReaderPrediction;
use rcqa::retrieval::{OracleLabels, Ranking};

fn e(i: u32) -> EntityId {
    EntityId(i)
}

fn a(i: u32) -> ArticleId {
    ArticleId(i)
}

#[test]
fn hits_count_correct_top_answers() {
    let gold = vec![vec![e(1)], vec![e(2), e(3)], vec![e(4)], vec![e(5)]];
    let all = vec![Some(e(1)), Some(e(3)), Some(e(4)), Some(e(5))];
    assert_eq!(hits_at_1(&all, &gold).unwrap(), 1.0);
    let none = vec![Some(e(9)), None, Some(e(1)), None];
    assert_eq!(hits_at_1(&none, &gold).unwrap(), 0.0);
    let half = vec![Some(e(1)), Some(e(2)), None, Some(e(4))];
    assert_eq!(hits_at_1(&half, &gold).unwrap(), 0.5);
    assert!(hits_at_1(&half[..3], &gold).unwrap_err().is_validation());
}

fn labels(pairs: &[(usize, Vec<u32>)], excluded: &[usize]) -> OracleLabels {
    OracleLabels {
        labels: pairs
            .iter()
            .map(|(q, l)| (*q, l.iter().copied().map(a).collect()))
            .collect(),
        excluded: excluded.to_vec(),
    }
}

fn ranked(pairs: &[(usize, Vec<u32>)]) -> BTreeMap<usize, Vec<ArticleId>> {
    pairs
        .iter()
        .map(|(q, l)| (*q, l.iter().copied().map(a).collect()))
        .collect()
}

#[test]
fn hand_worked_recall_and_precision() {
    let oracle = labels(&[(0, vec![5]), (1, vec![2, 7]), (2, vec![1])], &[3]);
    let rankings = ranked(&[
        (0, vec![5, 1, 2]),
        (1, vec![3, 7, 2]),
        (2, vec![4, 6]),
        (3, vec![1]),
    ]);
    let r1 = recall_at_k(&rankings, &oracle, 1);
    assert_eq!((r1.evaluated, r1.excluded), (3, 1));
    assert!((r1.value - 1.0 / 3.0).abs() < 1e-15);
    assert!((recall_at_k(&rankings, &oracle, 2).value - 2.0 / 3.0).abs() < 1e-15);
    // question 1 finds half its labels at k=2 and all at k=3
    assert!((precision_at_k(&rankings, &oracle, 2).value - 0.5).abs() < 1e-15);
    assert!((precision_at_k(&rankings, &oracle, 3).value - 2.0 / 3.0).abs() < 1e-15);
    assert!((precision_at_k_micro(&rankings, &oracle, 3).value - 0.75).abs() < 1e-15);
}

#[test]
fn first_place_oracles_and_unbounded_k_give_one() {
    let oracle = labels(&[(0, vec![1]), (1, vec![4])], &[]);
    let rankings = ranked(&[(0, vec![1, 2]), (1, vec![4, 0])]);
    assert_eq!(recall_at_k(&rankings, &oracle, 1).value, 1.0);
    assert_eq!(precision_at_k(&rankings, &oracle, 1).value, 1.0);
    let late = ranked(&[(0, vec![3, 2, 1]), (1, vec![0, 4])]);
    assert_eq!(recall_at_k(&late, &oracle, usize::MAX).value, 1.0);
    assert_eq!(precision_at_k(&late, &oracle, usize::MAX).value, 1.0);
}

fn brute_recall(
    rankings: &BTreeMap<usize, Vec<ArticleId>>,
    oracle: &OracleLabels,
    k: usize,
) -> f64 {
    let mut hit = 0;
    let mut n = 0;
    for (q, r) in rankings {
        let Some(l) = oracle.labels.get(q) else {
            continue;
        };
        n += 1;
        let best = r.iter().position(|x| l.contains(x));
        if best.is_some_and(|p| p < k) {
            hit += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        hit as f64 / n as f64
    }
}

fn brute_precision(
    rankings: &BTreeMap<usize, Vec<ArticleId>>,
    oracle: &OracleLabels,
    k: usize,
) -> f64 {
    let mut total = 0.0;
    let mut n = 0;
    for (q, r) in rankings {
        let Some(l) = oracle.labels.get(q) else {
            continue;
        };
        n += 1;
        let mut found = 0;
        for x in l {
            if let Some(p) = r.iter().position(|y| y == x) {
                if p < k {
                    found += 1;
                }
            }
        }
        total += found as f64 / l.len() as f64;
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

fn case() -> impl Strategy<Value = (BTreeMap<usize, Vec<ArticleId>>, OracleLabels)> {
    proptest::collection::vec(
        (
            any::<u64>().prop_map(|seed| {
                use rand::seq::SliceRandom;
                use rand::Rng;
                let mut r = rcqa::rng::stream(seed, rcqa::rng::SHUFFLING, 0);
                let mut ids: Vec<u32> = (0..12).collect();
                ids.shuffle(&mut r);
                ids.truncate(r.gen_range(0..12));
                ids
            }),
            proptest::collection::btree_set(0u32..12, 0..4),
        ),
        1..100,
    )
    .prop_map(|qs| {
        let mut rankings = BTreeMap::new();
        let mut oracle = OracleLabels {
            labels: BTreeMap::new(),
            excluded: Vec::new(),
        };
        for (q, (r, l)) in qs.into_iter().enumerate() {
            rankings.insert(q, r.into_iter().map(a).collect());
            if l.is_empty() {
                oracle.excluded.push(q);
            } else {
                oracle.labels.insert(q, l.into_iter().map(a).collect());
            }
        }
        (rankings, oracle)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn metrics_match_brute_force_and_grow_with_k((rankings, oracle) in case()) {
        let mut prev = (0.0, 0.0);
        for k in 0..=13 {
            let r = recall_at_k(&rankings, &oracle, k);
            let p = precision_at_k(&rankings, &oracle, k);
            prop_assert!((r.value - brute_recall(&rankings, &oracle, k)).abs() < 1e-12);
            prop_assert!((p.value - brute_precision(&rankings, &oracle, k)).abs() < 1e-12);
            prop_assert_eq!(r.excluded, oracle.excluded.len());
            prop_assert!((0.0..=1.0).contains(&r.value) && (0.0..=1.0).contains(&p.value));
            prop_assert!(r.value >= prev.0 && p.value >= prev.1);
            prop_assert!(p.value <= r.value + 1e-12);
            prev = (r.value, p.value);
        }
        let report = RetrievalReport::compute("r1", &rankings, &oracle, &DEFAULT_KS);
        for w in DEFAULT_KS.windows(2) {
            prop_assert!(report.recall[&w[0]] <= report.recall[&w[1]]);
            prop_assert!(report.precision[&w[0]] <= report.precision[&w[1]]);
        }
    }

    #[test]
    fn hits_survive_strictly_monotone_rescaling(
        scores in proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 1..8), 1..40),
        gold in proptest::collection::vec(0u32..8, 40),
    ) {
        let argmax = |row: &[f64]| {
            let mut best = 0;
            for (i, &s) in row.iter().enumerate() {
                if s > row[best] {
                    best = i;
                }
            }
            Some(e(best as u32))
        };
        let gold: Vec<Vec<EntityId>> = gold[..scores.len()].iter().map(|&g| vec![e(g)]).collect();
        let plain: Vec<_> = scores.iter().map(|r| argmax(r)).collect();
        let warped: Vec<_> = scores
            .iter()
            .map(|r| argmax(&r.iter().map(|x| (3.0 * x).exp() + x.powi(3)).collect::<Vec<_>>()))
            .collect();
        prop_assert_eq!(hits_at_1(&plain, &gold).unwrap(), hits_at_1(&warped, &gold).unwrap());
    }
}

#[test]
fn gate_ratio_counts_open_gates_per_category() {
    let preds = [
        (Some("movie_to_genre"), Some(0.9)),
        (Some("movie_to_genre"), Some(0.2)),
        (Some("movie_to_genre"), Some(0.51)),
        (Some("movie_to_year"), Some(0.5)),
        (Some("movie_to_year"), None),
        (None, Some(0.7)),
    ];
    let r = gate_ratio(&preds);
    assert!((r["movie_to_genre"] - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(r["movie_to_year"], 0.0);
    assert_eq!(r["unknown"], 1.0);
    let closed = gate_ratio(&[(Some("x"), Some(0.0)), (Some("y"), Some(0.0))]);
    assert!(closed.values().all(|&v| v == 0.0));
}

fn pred(
    qa_id: usize,
    category: Option<&str>,
    correct: bool,
    gate: Option<f64>,
) -> ReaderPrediction {
    ReaderPrediction {
        qa_id,
        entity: Some(e(qa_id as u32)),
        gate,
        source: None,
        top: vec![(e(qa_id as u32), 0.75)],
        correct,
        category: category.map(str::to_string),
    }
}

#[test]
fn reader_report_overall_is_the_weighted_category_mean() {
    let preds = vec![
        pred(0, Some("movie_to_genre"), true, Some(0.9)),
        pred(1, Some("movie_to_genre"), false, Some(0.1)),
        pred(2, Some("movie_to_year"), true, Some(0.0)),
        pred(3, Some("movie_to_year"), true, Some(0.0)),
        pred(4, Some("movie_to_year"), false, Some(0.0)),
        pred(5, None, true, None),
    ];
    let report = ReaderReport::from_predictions("AsV", "test", &preds);
    assert_eq!(report.schema_version, SCHEMA_VERSION);
    assert_eq!(report.questions, 6);
    let weighted: f64 = report
        .categories
        .values()
        .map(|c| c.hits_at_1 * c.questions as f64)
        .sum::<f64>()
        / report.questions as f64;
    assert!((report.hits_at_1 - weighted).abs() < 1e-15);
    assert!((report.hits_at_1 - 4.0 / 6.0).abs() < 1e-15);
    assert_eq!(report.categories["movie_to_genre"].gate_open, 0.5);
    assert_eq!(report.categories["unknown"].questions, 1);
    assert!(report
        .categories
        .values()
        .all(|c| (0.0..=1.0).contains(&c.gate_open)));

    let json = report.to_json().unwrap();
    let back: ReaderReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(value["schema_version"], SCHEMA_VERSION);
    assert!(report.table().contains("movie_to_year"));
}

#[test]
fn retrieval_report_json_and_dumps() {
    let oracle = labels(&[(0, vec![5]), (2, vec![1, 3])], &[1]);
    let rankings = ranked(&[(0, vec![5, 1]), (1, vec![2]), (2, vec![3, 0, 1])]);
    let report = RetrievalReport::compute("r0", &rankings, &oracle, &DEFAULT_KS);
    assert_eq!(
        (report.questions, report.evaluated, report.excluded),
        (3, 2, 1)
    );
    assert_eq!(
        report.recall.keys().copied().collect::<Vec<_>>(),
        DEFAULT_KS.to_vec()
    );
    let back: RetrievalReport = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    assert_eq!(back, report);
    assert!(report.table().contains("excluded (no oracle) 1"));

    let dir = tempfile::tempdir().unwrap();
    let full: BTreeMap<usize, Ranking> = [(
        4,
        Ranking {
            articles: vec![a(2), a(0)],
            scores: vec![3.5, 1.0],
        },
    )]
    .into_iter()
    .collect();
    let path = dir.path().join("r.tsv");
    write_retrieval_dump(&path, &full).unwrap();
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        "4\t2,0\t3.500000,1.000000\n"
    );
    let path = dir.path().join("o.tsv");
    write_oracle_dump(&path, &oracle).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), "0\t5\n2\t1,3\n");
}
