use proptest::prelude::*;

use rcqa::corpus::{
    synth_corpus, ArticleId, Corpus, RawArticle, RawCorpus, RawQa, Split, SynthConfig,
};
use rcqa::eval::recall_at_k;
use rcqa::pipeline::{article_lists, oracle, rankings};
use rcqa::retrieval::{
    build_oracle, candidates_r0, score_r1, train_ranker, Candidate, EntityIndex, RankerConfig,
    RankerKind, Retriever, RetrieverKind, TITLE_BONUS,
};
use rcqa::{Graph, RankerModel, Tensor};

fn corpus(n_movies: usize) -> Corpus {
    synth_corpus(
        &SynthConfig {
            n_movies,
            ..SynthConfig::default()
        },
        1,
    )
    .unwrap()
}

fn qa_with_text<'a>(c: &'a Corpus, text: &str) -> &'a rcqa::corpus::QaPair {
    c.qa.iter().find(|q| q.text == text).unwrap()
}

#[test]
fn blade_runner_question_finds_its_article_and_label() {
    let c = corpus(20);
    let index = EntityIndex::new(&c);
    let qa = qa_with_text(&c, "who directed the movie Blade Runner?");
    let set = candidates_r0(qa, &c, &index);
    let br = c
        .articles
        .iter()
        .find(|a| a.title == "Blade Runner")
        .unwrap()
        .id;
    assert!(set.contains(br));
    assert!(set.candidates.iter().all(|cand| cand.matched >= 1));
    let labels = build_oracle(&c, &index);
    assert_eq!(labels.get(qa.id), Some(&[br][..]));
}

#[test]
fn person_to_movie_labels_are_the_answer_articles() {
    let c = corpus(20);
    let labels = oracle(&c);
    let qa =
        c.qa.iter()
            .find(|q| q.category.as_deref() == Some("director_to_movie"))
            .unwrap();
    let mut want: Vec<ArticleId> = c
        .articles
        .iter()
        .filter(|a| a.title_entity.is_some_and(|t| qa.answers.contains(&t)))
        .map(|a| a.id)
        .collect();
    want.sort();
    assert_eq!(labels.get(qa.id), Some(want.as_slice()));
}

#[test]
fn question_about_a_movie_without_an_article_is_excluded() {
    let raw = RawCorpus {
        entities: vec!["Blade Runner".into(), "Ridley Scott".into(), "Alien".into()],
        articles: vec![RawArticle {
            title: "Blade Runner".into(),
            text: "Blade Runner is a film directed by Ridley Scott.".into(),
        }],
        qa: vec![
            RawQa {
                question: "who directed Alien?".into(),
                answers: vec!["Ridley Scott".into()],
                category: None,
                split: Some(Split::Train),
            },
            RawQa {
                question: "who directed Blade Runner?".into(),
                answers: vec!["Ridley Scott".into()],
                category: None,
                split: Some(Split::Train),
            },
        ],
    };
    let (c, _) = Corpus::build(raw, 1).unwrap();
    let labels = oracle(&c);
    assert_eq!(labels.excluded, vec![c.qa[0].id]);
    assert_eq!(labels.get(c.qa[1].id), Some(&[ArticleId(0)][..]));
}

#[test]
fn question_without_entities_has_an_empty_flagged_set() {
    let c = corpus(10);
    let (surface, question) = c.encode_text("what is going on here?");
    let qa = rcqa::corpus::QaPair {
        id: 0,
        text: String::new(),
        surface,
        question,
        answers: Vec::new(),
        category: None,
        split: Split::Test,
    };
    let set = candidates_r0(&qa, &c, &EntityIndex::new(&c));
    assert!(set.is_empty());
    assert!(set.diagnostic.is_some());
    for kind in [RetrieverKind::R0, RetrieverKind::R1] {
        assert!(Retriever::<f64>::new(&c, kind, 1)
            .unwrap()
            .ranking(&qa)
            .unwrap()
            .articles
            .is_empty());
    }
}

#[test]
fn collision_titles_pull_in_spurious_candidates_that_r1_demotes() {
    let c = corpus(200);
    let index = EntityIndex::new(&c);
    let labels = build_oracle(&c, &index);
    let spurious =
        c.qa.iter()
            .filter(|q| {
                q.category
                    .as_deref()
                    .is_some_and(|k| k.starts_with("movie_to"))
            })
            .filter(|q| {
                let set = candidates_r0(q, &c, &index);
                let wanted = labels.get(q.id).unwrap_or(&[]);
                set.candidates.iter().any(|x| !wanted.contains(&x.article))
            })
            .count();
    assert!(spurious > 0);
    let r0 = rankings(&c, RetrieverKind::R0, None, 1, Some(Split::Test)).unwrap();
    let r1 = rankings(&c, RetrieverKind::R1, None, 1, Some(Split::Test)).unwrap();
    let r0 = recall_at_k(&article_lists(&r0), &labels, 1).value;
    let r1 = recall_at_k(&article_lists(&r1), &labels, 1).value;
    assert!(r1 > r0, "r1 {r1} r0 {r0}");
}

#[test]
fn candidates_cover_every_oracle_label_on_consistent_data() {
    let c = corpus(60);
    let index = EntityIndex::new(&c);
    let labels = build_oracle(&c, &index);
    for q in &c.qa {
        let set = candidates_r0(q, &c, &index);
        for &a in labels.get(q.id).unwrap_or(&[]) {
            assert!(set.contains(a), "question {} label {}", q.text, a.0);
        }
    }
}

#[test]
fn title_match_outranks_any_entity_count() {
    let title = Candidate {
        article: ArticleId(9),
        matched: 1,
        title_match: true,
    };
    let busy = Candidate {
        article: ArticleId(1),
        matched: 50,
        title_match: false,
    };
    let quiet = Candidate {
        article: ArticleId(2),
        matched: 3,
        title_match: false,
    };
    assert!(score_r1(&title) > score_r1(&busy));
    assert!(score_r1(&busy) > score_r1(&quiet));
    assert_eq!(score_r1(&title), TITLE_BONUS + 1.0);

    let c = corpus(60);
    let r1 = Retriever::<f64>::new(&c, RetrieverKind::R1, 1).unwrap();
    for q in c.qa.iter().take(100) {
        let ranking = r1.ranking(q).unwrap();
        let set = r1.candidates(q);
        let titled = |a: &ArticleId| {
            set.candidates
                .iter()
                .find(|x| x.article == *a)
                .unwrap()
                .title_match
        };
        let first_plain = ranking
            .articles
            .iter()
            .position(|a| !titled(a))
            .unwrap_or(ranking.articles.len());
        assert!(ranking.articles[first_plain..].iter().all(|a| !titled(a)));
        assert!(ranking.scores.windows(2).all(|w| w[0] >= w[1]));
    }
}

#[test]
fn every_candidate_returned_when_m_exceeds_n_and_rankings_repeat() {
    let c = corpus(30);
    for kind in [RetrieverKind::R0, RetrieverKind::R1] {
        let r = Retriever::<f64>::new(&c, kind, 7).unwrap();
        for q in c.qa.iter().take(40) {
            let mut got = r.retrieve(q, 10_000).unwrap();
            got.sort();
            let want: Vec<ArticleId> = r
                .candidates(q)
                .candidates
                .iter()
                .map(|x| x.article)
                .collect();
            assert_eq!(got, want);
            assert_eq!(r.ranking(q).unwrap(), r.ranking(q).unwrap());
        }
    }
    let a = rankings(&c, RetrieverKind::R0, None, 7, None).unwrap();
    let b = rankings(&c, RetrieverKind::R0, None, 7, None).unwrap();
    assert_eq!(a, b);
}

fn toy_ranker(c: &Corpus, kind: RankerKind, exponent: u32, normalize: bool) -> RankerModel {
    RankerModel::new(
        RankerConfig {
            kind,
            d_w: 4,
            hidden: 3,
            exponent,
            normalize,
            ..RankerConfig::default()
        },
        c,
    )
    .unwrap()
}

fn set_scalar(m: &mut RankerModel, pick: fn(&RankerModel) -> rcqa::tensor::ParamId, x: f64) {
    let id = pick(m);
    m.store.value_mut(id).data_mut()[0] = x;
}

fn wla(m: &RankerModel, v: &[f64], rows: &[Vec<f64>]) -> f64 {
    let mut g = Graph::new(&m.store);
    let v = g.input(Tensor::vector(v.to_vec()));
    let h = g.input(Tensor::from_rows(rows).unwrap());
    let s = m.wla_score(&mut g, v, h).unwrap();
    g.value(s).item()
}

fn unit(x: &[f64]) -> Vec<f64> {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 {
        x.to_vec()
    } else {
        x.iter().map(|v| v / n).collect()
    }
}

#[test]
fn zero_scale_or_orthogonal_articles_score_zero() {
    let c = corpus(6);
    let mut m = toy_ranker(&c, RankerKind::Wla, 4, true);
    let rows = vec![
        vec![0.0, 1.0, 0.0, 0.0, 0.0, 2.0],
        vec![0.0, 0.0, 3.0, 0.0, 0.0, 0.0],
    ];
    let v = vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
    set_scalar(&mut m, |m| m.w, 2.0);
    set_scalar(&mut m, |m| m.b, 0.0);
    assert_eq!(wla(&m, &v, &rows), 0.0);
    set_scalar(&mut m, |m| m.w, 0.0);
    assert_eq!(wla(&m, &v, &[vec![1.0; 6]]), 0.0);
    // zero rows are guarded and contribute nothing
    set_scalar(&mut m, |m| m.w, 1.0);
    assert_eq!(wla(&m, &v, &[vec![0.0; 6]]), 0.0);
}

#[test]
fn three_positions_match_a_hand_loop() {
    let c = corpus(6);
    let mut m = toy_ranker(&c, RankerKind::Wla, 4, true);
    set_scalar(&mut m, |m| m.w, 1.7);
    set_scalar(&mut m, |m| m.b, -0.3);
    let v = vec![0.2, -1.0, 0.5, 0.3, 0.0, 0.9];
    let rows = vec![
        vec![1.0, 0.5, -0.2, 0.0, 0.3, 0.1],
        vec![-0.4, 0.2, 0.9, 1.1, -0.6, 0.0],
        vec![0.0, 0.0, 0.1, -0.2, 0.8, 0.5],
    ];
    let q: Vec<f64> = unit(&v).iter().map(|x| 1.7 * x - 0.3).collect();
    let want: f64 = rows
        .iter()
        .map(|r| {
            unit(r)
                .iter()
                .zip(&q)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .powi(4)
        })
        .sum();
    assert!((wla(&m, &v, &rows) - want).abs() < 1e-12);
}

#[test]
fn exponent_one_without_normalization_is_the_sum_dual_encoder() {
    let c = corpus(6);
    let mut wla_m = toy_ranker(&c, RankerKind::Wla, 1, false);
    set_scalar(&mut wla_m, |m| m.w, 1.0);
    set_scalar(&mut wla_m, |m| m.b, 0.0);
    let sum_m = toy_ranker(&c, RankerKind::SumHidden, 1, false);
    let mut r = rcqa::rng::stream(5, rcqa::rng::SYNTH, 0);
    use rand::Rng;
    for _ in 0..50 {
        let n = r.gen_range(1..7);
        let v: Vec<f64> = (0..6).map(|_| r.gen_range(-1.0..1.0)).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..6).map(|_| r.gen_range(-1.0..1.0)).collect())
            .collect();
        let naive: f64 = rows
            .iter()
            .map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>())
            .sum();
        let mut g = Graph::new(&sum_m.store);
        let vv = g.input(Tensor::vector(v.clone()));
        let h = g.input(Tensor::from_rows(&rows).unwrap());
        let s = sum_m
            .dual_encoder_score(&mut g, vv, h, RankerKind::SumHidden)
            .unwrap();
        let dual = g.value(s).item();
        assert!((wla(&wla_m, &v, &rows) - dual).abs() < 1e-12);
        assert!((dual - naive).abs() < 1e-12);
    }
    let mut g = Graph::new(&sum_m.store);
    let vv = g.input(Tensor::vector(vec![1.0; 6]));
    let h = g.input(Tensor::zeros(&[3, 6]));
    let s = sum_m
        .dual_encoder_score(&mut g, vv, h, RankerKind::SumHidden)
        .unwrap();
    assert_eq!(g.value(s).item(), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wla_is_non_negative_and_ignores_position_order(
        rows in proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 6), 1..9),
        v in proptest::collection::vec(-2.0f64..2.0, 6),
        w in -3.0f64..3.0,
        b in -1.0f64..1.0,
        seed in 0u64..1000,
    ) {
        let c = corpus(6);
        let mut m = toy_ranker(&c, RankerKind::Wla, 4, true);
        set_scalar(&mut m, |m| m.w, w);
        set_scalar(&mut m, |m| m.b, b);
        let s = wla(&m, &v, &rows);
        prop_assert!(s >= 0.0);
        let mut shuffled = rows.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut rcqa::rng::stream(seed, rcqa::rng::SHUFFLING, 0));
        // a positional sum: reordering rows changes only the summation order
        prop_assert!((wla(&m, &v, &shuffled) - s).abs() <= 1e-12 * s.max(1.0));
        let mut reversed = rows.clone();
        reversed.reverse();
        let mut doubled = rows.clone();
        doubled.extend(reversed);
        prop_assert!(wla(&m, &v, &doubled) >= s);
    }
}

#[test]
fn relevance_probability_is_a_monotone_sigmoid_of_the_score() {
    let c = corpus(6);
    let mut m = toy_ranker(&c, RankerKind::Wla, 4, true);
    let prob = |m: &RankerModel, s: f64| {
        let mut g = Graph::new(&m.store);
        let s = g.constant(s);
        let o = m.wla_prob(&mut g, s).unwrap();
        g.value(o).item()
    };
    set_scalar(&mut m, |m| m.w_out, 0.0);
    set_scalar(&mut m, |m| m.b_out, 0.8);
    assert_eq!(prob(&m, 5.0), rcqa::tensor::sigmoid(0.8));
    set_scalar(&mut m, |m| m.w_out, 1.0);
    set_scalar(&mut m, |m| m.b_out, 0.0);
    assert_eq!(prob(&m, 0.0), 0.5);
    assert!(prob(&m, 2.0) > prob(&m, 1.0));
}

fn tiny_ranker_config() -> RankerConfig {
    RankerConfig {
        d_w: 4,
        hidden: 3,
        batch: 4,
        max_steps: 30,
        eval_every: 10,
        ..RankerConfig::default()
    }
}

#[test]
fn seeded_ranker_training_repeats_and_round_trips() {
    let c = corpus(12);
    let labels = oracle(&c);
    let (a, ra) = train_ranker::<f64>(&c, &labels, &tiny_ranker_config()).unwrap();
    let (b, rb) = train_ranker::<f64>(&c, &labels, &tiny_ranker_config()).unwrap();
    assert_eq!(ra.dev_curve, rb.dev_curve);
    assert_eq!(ra.loss_curve, rb.loss_curve);
    assert_eq!(a.store.snapshot(), b.store.snapshot());
    assert!(ra.steps > 0 && ra.steps <= 30);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ranker.ckpt");
    a.save(&path).unwrap();
    let back = RankerModel::load(&path, &c).unwrap();
    assert_eq!(back.store.snapshot(), a.store.snapshot());
    let before = rankings(&c, RetrieverKind::R2, Some(&a), 1, Some(Split::Dev)).unwrap();
    let after = rankings(&c, RetrieverKind::R2, Some(&back), 1, Some(Split::Dev)).unwrap();
    assert_eq!(before, after);
}

#[test]
fn r2_reorders_only_entity_matched_candidates() {
    let c = corpus(12);
    let m = RankerModel::new(tiny_ranker_config(), &c).unwrap();
    let r2 = Retriever::learned(&c, &m, 1).unwrap();
    for q in c.qa.iter().take(30) {
        let mut got = r2.ranking(q).unwrap().articles;
        got.sort();
        let want: Vec<ArticleId> = r2
            .candidates(q)
            .candidates
            .iter()
            .map(|x| x.article)
            .collect();
        assert_eq!(got, want);
    }
    assert!(Retriever::<f64>::new(&c, RetrieverKind::R2, 1).is_err());
}
