mod common;

use std::collections::BTreeSet;

use infodemic::catalog::{
    categorize_tags, normalize_domain, Category, CategorySet, Listing, Provider, SourceCatalog,
    TagMode,
};
use infodemic::geo::normalize_location;
use infodemic::graph::{extract_cascades, EngagementGraph};
use infodemic::ingest::{ingest_lines, matches_keywords, Filters, DEFAULT_KEYWORDS};
use infodemic::sentiment::{score_text, SentimentLabel, SentimentLexicon};
use infodemic::topics::{embed_tweet, EmbedParams};
use infodemic::trends::ols_slope;
use infodemic::tweet::parse_tweet;
use infodemic::unionfind::UnionFind;
use proptest::prelude::*;
use proptest::sample::select;

fn lexicon_tokens() -> Vec<(String, f64)> {
    std::fs::read_to_string(common::data_dir().join("lexicon.tsv"))
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let mut cols = l.split('\t');
            (
                cols.next().unwrap().to_string(),
                cols.next().unwrap().parse().unwrap(),
            )
        })
        .collect()
}

fn vocab_tags(p: Provider) -> Vec<&'static str> {
    p.vocabulary().iter().map(|(t, _)| *t).collect()
}

fn provider() -> impl Strategy<Value = Provider> {
    select(Provider::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn keyword_match_ignores_case(text in "[ -~]{0,60}", pick in 0usize..6, upper in any::<bool>()) {
        let with_kw = format!("{text} {}", if upper { DEFAULT_KEYWORDS[pick].to_uppercase() } else { DEFAULT_KEYWORDS[pick].to_string() });
        prop_assert!(matches_keywords(&with_kw, &DEFAULT_KEYWORDS));
        prop_assert_eq!(matches_keywords(&text, &DEFAULT_KEYWORDS), matches_keywords(&text.to_lowercase(), &DEFAULT_KEYWORDS));
        prop_assert_eq!(matches_keywords(&text, &DEFAULT_KEYWORDS), matches_keywords(&text.to_uppercase(), &DEFAULT_KEYWORDS));
    }

    #[test]
    fn location_normalization_is_idempotent(s in "[ -~]{0,40}") {
        let once = normalize_location(&s);
        prop_assert_eq!(normalize_location(&once), once);
    }

    #[test]
    fn location_match_sees_through_normalization(
        idx in 0usize..200,
        prefix in "[a-zA-Z .]{0,12}",
        shout in any::<bool>(),
        junk in "[!?.;:]{0,3}",
    ) {
        let gaz = common::gazetteer();
        let pattern = &gaz.entries()[idx % gaz.len()].pattern;
        let shown = if shout { pattern.to_uppercase() } else { pattern.clone() };
        let raw = format!("{prefix}, {shown}{junk}");
        let direct = gaz.match_location(&raw).map(|e| (&e.country, &e.us_state));
        let normalized = gaz.match_location(&normalize_location(&raw)).map(|e| (&e.country, &e.us_state));
        prop_assert!(direct.is_some());
        prop_assert_eq!(direct, normalized);
    }

    #[test]
    fn domain_ignores_scheme_case_and_www(
        labels in prop::collection::vec("[a-z][a-z0-9]{0,8}", 2..4),
        scheme in select(vec!["", "http://", "https://", "HTTPS://"]),
        www in any::<bool>(),
        path in "(/[a-z0-9]{1,6}){0,2}",
    ) {
        let host = labels.join(".");
        let bare = normalize_domain(&host).unwrap();
        let decorated = format!("{scheme}{}{}{path}", if www { "WWW." } else { "" }, host.to_uppercase());
        prop_assert_eq!(normalize_domain(&decorated).unwrap(), bare);
    }

    #[test]
    fn categorization_is_monotone(p in provider(), seed in any::<u64>()) {
        let tags = vocab_tags(p);
        let mut rng = common::rng(seed);
        use rand::Rng;
        let small: Vec<&str> = tags.iter().copied().filter(|_| rng.gen_bool(0.4)).collect();
        let mut large = small.clone();
        large.extend(tags.iter().copied().filter(|_| rng.gen_bool(0.4)));
        let a = categorize_tags(p, &small, TagMode::Strict).unwrap();
        let b = categorize_tags(p, &large, TagMode::Strict).unwrap();
        let excluded = p == Provider::Zimdars && small.iter().collect::<BTreeSet<_>>() == BTreeSet::from([&"political"]);
        if excluded {
            prop_assert!(a.is_empty());
        } else {
            prop_assert!(a.is_subset(b), "{small:?} -> {a:?} not within {large:?} -> {b:?}");
        }
    }

    #[test]
    fn larger_catalog_never_unlabels(seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = common::rng(seed);
        let domains = ["a.org", "b.net", "c.com", "d.info", "e.news"];
        let listing = |rng: &mut rand_chacha::ChaCha8Rng| {
            let p = Provider::ALL[rng.gen_range(0..3)];
            let tags = vocab_tags(p);
            Listing {
                domain: domains[rng.gen_range(0..domains.len())].to_string(),
                provider: p,
                tags: vec![tags[rng.gen_range(0..tags.len())].to_string()],
            }
        };
        let base: Vec<Listing> = (0..rng.gen_range(0..8)).map(|_| listing(&mut rng)).collect();
        let mut extended = base.clone();
        // non-zimdars additions cannot trigger the solely-political exclusion
        for _ in 0..rng.gen_range(0..6) {
            let l = listing(&mut rng);
            if l.provider != Provider::Zimdars {
                extended.push(l);
            }
        }
        let small = SourceCatalog::from_listings(&base, TagMode::Strict).unwrap();
        let large = SourceCatalog::from_listings(&extended, TagMode::Strict).unwrap();
        for d in domains {
            let url = format!("https://www.{d}/story");
            let a = small.categories_of(&url).unwrap_or(CategorySet::EMPTY);
            let b = large.categories_of(&url).unwrap_or(CategorySet::EMPTY);
            prop_assert!(a.is_subset(b));
        }
    }

    #[test]
    fn union_find_agrees_with_naive_labels(n in 1usize..60, ops in prop::collection::vec((0usize..60, 0usize..60), 0..80)) {
        let mut uf = UnionFind::new(n);
        let mut label: Vec<usize> = (0..n).collect();
        for (a, b) in ops {
            let (a, b) = (a % n, b % n);
            let merged = uf.union(a, b);
            let (la, lb) = (label[a], label[b]);
            prop_assert_eq!(merged, la != lb);
            for l in label.iter_mut() {
                if *l == lb {
                    *l = la;
                }
            }
        }
        prop_assert_eq!(uf.set_count(), label.iter().collect::<BTreeSet<_>>().len());
        for a in 0..n {
            for b in 0..n {
                prop_assert_eq!(uf.same(a, b), label[a] == label[b]);
            }
        }
    }

    #[test]
    fn parse_tweet_is_total(raw in "\\PC{0,200}") {
        let _ = parse_tweet(&raw);
    }

    #[test]
    fn parse_tweet_survives_mangled_records(cut in 0usize..400, flip in 0usize..400, byte in 32u8..127) {
        let mut rec = String::from(r#"{"id_str":"9","created_at":"Wed Mar 04 12:00:00 +0000 2020","text":"covid19 #Stay","lang":"en","user":{"id_str":"3","verified":true,"location":"Paris"},"coordinates":{"coordinates":[2.3,48.8]},"retweeted_status":{"id_str":"8","text":"x","user":{"id_str":"4"}},"entities":{"hashtags":[{"text":"Stay"}],"urls":[{"expanded_url":"https://a.org"}]}}"#);
        if flip < rec.len() {
            rec.replace_range(flip..flip + 1, &(byte as char).to_string());
        }
        let _ = parse_tweet(&rec[..cut.min(rec.len())]);
        let _ = parse_tweet(&rec);
    }

    #[test]
    fn ols_slope_is_shift_invariant(ys in prop::collection::vec(0.0f64..1e4, 2..60), c in -1e4f64..1e4) {
        let shifted: Vec<f64> = ys.iter().map(|y| y + c).collect();
        let (a, _) = ols_slope(&ys);
        let (b, _) = ols_slope(&shifted);
        prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
        prop_assert!((a - common::closed_form_slope(&ys)).abs() <= 1e-9 * (1.0 + a.abs()));
    }

    #[test]
    fn embedding_is_unit_and_reproducible(text in "\\PC{0,80}", seed in any::<u64>()) {
        let params = EmbedParams { seed, ..EmbedParams::default() };
        let a = embed_tweet(&text, &params);
        let b = embed_tweet(&text, &params);
        prop_assert_eq!(&a, &b);
        let norm: f64 = a.values.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-12);
        if a.degenerate {
            prop_assert_eq!(a.values[0], 1.0);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cascades_partition_like_bfs(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let (nodes, links) = common::random_links(&mut rng, 400, 1200);
        let graph = EngagementGraph::from_links(&nodes, &links);
        prop_assert!(graph.edge_count() <= graph.node_count());
        let mut has_parent = vec![false; graph.node_count()];
        for e in graph.edges() {
            prop_assert_ne!(e.child, e.parent);
            prop_assert!(!has_parent[e.child as usize]);
            has_parent[e.child as usize] = true;
        }
        let cascades = extract_cascades(&graph, None);
        prop_assert_eq!(cascades.iter().map(|c| c.size).sum::<usize>(), graph.node_count());
        prop_assert_eq!(common::cascade_components(&cascades), common::bfs_components(&graph));
        for c in &cascades {
            prop_assert_eq!(common::tree_violation(c), None);
        }
    }
}

const FILLER: [&str; 6] = ["the", "a", "covid", "update", "city", "today"];

fn sentiment_text() -> impl Strategy<Value = String> {
    let words: Vec<String> = lexicon_tokens()
        .into_iter()
        .map(|(w, _)| w)
        .chain(FILLER.iter().map(|w| w.to_string()))
        .chain(
            ["not", "never", "don't", "very", "slightly", "!"]
                .iter()
                .map(|w| w.to_string()),
        )
        .collect();
    (
        prop::collection::vec(select(words), 0..25),
        prop::collection::vec(any::<bool>(), 25),
    )
        .prop_map(|(ws, caps)| {
            ws.iter()
                .zip(caps)
                .map(|(w, c)| if c { w.to_uppercase() } else { w.clone() })
                .collect::<Vec<_>>()
                .join(" ")
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn compound_is_bounded(text in sentiment_text(), noise in "\\PC{0,40}") {
        let lex = SentimentLexicon::bundled();
        for t in [text.clone(), format!("{text}{noise}")] {
            let s = score_text(&lex, &t);
            prop_assert!((-1.0..=1.0).contains(&s.compound), "{t:?} -> {}", s.compound);
        }
    }

    #[test]
    fn appending_positive_word_never_lowers_raw(text in sentiment_text(), pick in 0usize..1000) {
        let lex = SentimentLexicon::bundled();
        let positives: Vec<String> = lexicon_tokens().into_iter().filter(|(_, v)| *v > 0.0).map(|(w, _)| w).collect();
        let word = &positives[pick % positives.len()];
        let before = score_text(&lex, &text).raw_sum;
        let after = score_text(&lex, &format!("{text} the city update {word}")).raw_sum;
        prop_assert!(after >= before, "{before} -> {after}");
    }

    #[test]
    fn doubling_valences_keeps_sign(words in prop::collection::vec(select(lexicon_tokens().into_iter().map(|(w, _)| w).chain(["not".to_string(), "the".to_string()]).collect::<Vec<_>>()), 0..15)) {
        let text = words.join(" ");
        let lex = SentimentLexicon::bundled();
        let a = score_text(&lex, &text).compound;
        let b = score_text(&lex.scaled(2.0), &text).compound;
        prop_assert_eq!(a.signum() == b.signum() || (a == 0.0 && b == 0.0), true, "{} vs {}", a, b);
    }
}

#[test]
fn negation_flips_every_positive_word() {
    let lex = SentimentLexicon::bundled();
    for (word, v) in lexicon_tokens() {
        let plain = score_text(&lex, &word).label;
        let negated = score_text(&lex, &format!("not {word}")).label;
        if v > 0.0 {
            assert_eq!(
                (plain, negated),
                (SentimentLabel::Positive, SentimentLabel::Negative),
                "{word}"
            );
        } else {
            assert_eq!(
                (plain, negated),
                (SentimentLabel::Negative, SentimentLabel::Positive),
                "{word}"
            );
        }
    }
}

#[test]
fn empty_text_is_neutral() {
    let lex = SentimentLexicon::bundled();
    for t in ["", "   ", "the city update", "!!!"] {
        let s = score_text(&lex, t);
        assert_eq!((s.compound, s.label), (0.0, SentimentLabel::Neutral));
    }
}

#[test]
fn embeddings_match_across_thread_pools() {
    use rayon::prelude::*;
    let texts: Vec<String> = common::synth_lines(2_000, 3)
        .iter()
        .filter_map(|l| parse_tweet(l).ok())
        .map(|p| p.tweet.text)
        .collect();
    let params = EmbedParams {
        seed: 11,
        ..EmbedParams::default()
    };
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                texts
                    .par_iter()
                    .map(|t| embed_tweet(t, &params).values)
                    .collect::<Vec<_>>()
            })
    };
    let one = run(1);
    assert!(one
        .iter()
        .zip(run(4))
        .all(|(a, b)| a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits())));
}

#[test]
fn ingesting_twice_equals_once() {
    let lines = common::synth_lines(3_000, 5);
    let (once, _) = ingest_lines(&lines, &Filters::default());
    let doubled: Vec<&String> = lines.iter().chain(lines.iter()).collect();
    let (twice, report) = ingest_lines(&doubled, &Filters::default());
    assert_eq!(once.tweets(), twice.tweets());
    assert!(report.is_conserved());
}

#[test]
fn multi_label_political_clickbait() {
    let set = categorize_tags(
        Provider::Zimdars,
        &["political", "clickbait"],
        TagMode::Strict,
    )
    .unwrap();
    assert_eq!(
        set,
        CategorySet::of(&[Category::PoliticalBiased, Category::Clickbait])
    );
}

#[test]
fn categorize_subset_enumeration() {
    // exhaustive over every (subset, superset) pair of each provider's vocabulary
    for p in Provider::ALL {
        let tags = vocab_tags(p);
        let n = tags.len();
        let pick = |mask: u32| -> Vec<&str> {
            (0..n)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| tags[i])
                .collect()
        };
        let cats: Vec<CategorySet> = (0u32..1 << n)
            .map(|m| categorize_tags(p, &pick(m), TagMode::Strict).unwrap())
            .collect();
        let full = (1u32 << n) - 1;
        for small in 0..=full {
            if p == Provider::Zimdars && pick(small) == ["political"] {
                assert!(cats[small as usize].is_empty());
                continue;
            }
            // walk every superset of `small`
            let rest = full & !small;
            let mut extra = rest;
            loop {
                assert!(
                    cats[small as usize].is_subset(cats[(small | extra) as usize]),
                    "{p} {:?}",
                    pick(small)
                );
                if extra == 0 {
                    break;
                }
                extra = (extra - 1) & rest;
            }
        }
    }
}
