use serde::{Deserialize, Serialize};

use super::EngineConfig;
use crate::embedding::{wmd, wmd_lower_bound, EmbeddingStore, NBowDoc};
use crate::extract::TokenMask;
use crate::lang::{normalize, LanguageModel, Token};
use crate::registry::{AppDescriptor, Registry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatchedBy {
    SampleWmd { sample: String, distance: f64 },
    KeyPhrase { phrase: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedIntent {
    pub app_name: String,
    pub intent_name: String,
    pub matched_by: MatchedBy,
    /// App-name prefix plus the tokens the match used.
    pub consumed: TokenMask,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Resolution {
    Resolved(ResolvedIntent),
    Unrecognized,
}

/// Index of the comma closing a leading app name, and the app it names.
fn app_prefix<'r>(tokens: &[Token], registry: &'r Registry) -> Option<(usize, &'r AppDescriptor)> {
    let comma = tokens.iter().position(|t| t.is_punct && t.surface == ",")?;
    if comma == 0 {
        return None;
    }
    let words: Vec<&str> = tokens[..comma]
        .iter()
        .filter(|t| !t.is_punct)
        .map(|t| t.normalized.as_str())
        .collect();
    let spoken = words.join(" ");
    registry.list().iter().find(|app| {
        let name: Vec<String> = app.name.split_whitespace().map(normalize).collect();
        name.join(" ") == spoken
    }).map(|app| (comma, app))
}

fn phrase_words(lang: &dyn LanguageModel, phrase: &str) -> Vec<String> {
    lang.tokenize(phrase)
        .map(|tokens| {
            tokens
                .into_iter()
                .filter(|t| !t.is_punct)
                .map(|t| t.normalized)
                .collect()
        })
        .unwrap_or_default()
}

/// First position where `phrase` occurs as a contiguous run of free,
/// non-punctuation tokens.
fn find_phrase(tokens: &[Token], consumed: &TokenMask, phrase: &[String]) -> Option<Vec<usize>> {
    if phrase.is_empty() {
        return None;
    }
    let free: Vec<usize> = (0..tokens.len())
        .filter(|i| !consumed.contains(i) && !tokens[*i].is_punct)
        .collect();
    free.windows(phrase.len()).find_map(|window| {
        let contiguous = window.windows(2).all(|w| {
            // Only punctuation-free adjacency counts as contiguous.
            w[1] == w[0] + 1
        });
        let matches = window
            .iter()
            .zip(phrase)
            .all(|(&i, word)| tokens[i].normalized == *word);
        (contiguous && matches).then(|| window.to_vec())
    })
}

/// Maps an utterance to an intent.
///
/// 1. A leading `"<App>,"` restricts the search to that app and is consumed.
/// 2. Every sample of every candidate intent is scored by word mover's
///    distance in registry order; the first one under the threshold wins and
///    the search stops there.
/// 3. Otherwise the longest key phrase found in the utterance wins, ties
///    going to registry order.
pub fn resolve(
    tokens: &[Token],
    registry: &Registry,
    config: &EngineConfig,
    store: &EmbeddingStore,
    lang: &dyn LanguageModel,
) -> Resolution {
    let mut consumed = TokenMask::new();
    let candidates: Vec<&AppDescriptor> = match app_prefix(tokens, registry) {
        Some((comma, app)) => {
            consumed.extend(0..=comma);
            vec![app]
        }
        None => registry.list().iter().collect(),
    };

    let query: Vec<Token> = tokens
        .iter()
        .enumerate()
        .filter(|(i, _)| !consumed.contains(i))
        .map(|(_, t)| t.clone())
        .collect();

    if let Ok(query_doc) = NBowDoc::from_tokens(&query, store, config.drop_stopwords) {
        for app in &candidates {
            for intent in &app.intents {
                for sample in &intent.samples {
                    let Ok(sample_tokens) = lang.tokenize(sample) else {
                        continue;
                    };
                    // Samples with nothing in vocabulary are unscorable: treated as +inf.
                    let Ok(sample_doc) = NBowDoc::from_tokens(&sample_tokens, store, config.drop_stopwords) else {
                        continue;
                    };
                    match wmd_lower_bound(&query_doc, &sample_doc, store) {
                        Ok(bound) if bound >= config.threshold => continue,
                        Ok(_) => {}
                        Err(e) => {
                            tracing::debug!(error = %e, "sample skipped");
                            continue;
                        }
                    }
                    let Ok(distance) = wmd(&query_doc, &sample_doc, store) else {
                        continue;
                    };
                    if distance < config.threshold {
                        let sample_words: Vec<&str> = sample_tokens
                            .iter()
                            .filter(|t| !t.is_punct)
                            .map(|t| t.normalized.as_str())
                            .collect();
                        for (i, t) in tokens.iter().enumerate() {
                            if !t.is_punct && sample_words.contains(&t.normalized.as_str()) {
                                consumed.insert(i);
                            }
                        }
                        return Resolution::Resolved(ResolvedIntent {
                            app_name: app.name.clone(),
                            intent_name: intent.name.clone(),
                            matched_by: MatchedBy::SampleWmd { sample: sample.clone(), distance },
                            consumed,
                        });
                    }
                }
            }
        }
    }

    let mut best: Option<(usize, &AppDescriptor, &str, &str, Vec<usize>)> = None;
    for app in &candidates {
        for intent in &app.intents {
            for phrase in &intent.key_phrases {
                let words = phrase_words(lang, phrase);
                if let Some(hit) = find_phrase(tokens, &consumed, &words) {
                    let longer = best.as_ref().is_none_or(|(len, ..)| words.len() > *len);
                    if longer {
                        best = Some((words.len(), app, &intent.name, phrase, hit));
                    }
                }
            }
        }
    }
    match best {
        Some((_, app, intent, phrase, hit)) => {
            consumed.extend(hit);
            Resolution::Resolved(ResolvedIntent {
                app_name: app.name.clone(),
                intent_name: intent.to_string(),
                matched_by: MatchedBy::KeyPhrase { phrase: phrase.to_string() },
                consumed,
            })
        }
        None => Resolution::Unrecognized,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::EnglishModel;
    use crate::registry::parse_descriptor;

    fn fixtures() -> (Registry, EmbeddingStore) {
        let mut reg = Registry::in_memory();
        reg.register(parse_descriptor(include_bytes!("../../fixtures/apps/home.json")).unwrap())
            .unwrap();
        reg.register(parse_descriptor(include_bytes!("../../fixtures/apps/calendar.json")).unwrap())
            .unwrap();
        let store = EmbeddingStore::parse(include_str!("../../fixtures/embeddings/toy.txt")).unwrap();
        (reg, store)
    }

    fn run(text: &str) -> Resolution {
        let (reg, store) = fixtures();
        let en = EnglishModel::new();
        let tokens = en.tokenize(text).unwrap();
        resolve(&tokens, &reg, &EngineConfig::default(), &store, &en)
    }

    fn resolved(text: &str) -> ResolvedIntent {
        match run(text) {
            Resolution::Resolved(r) => r,
            Resolution::Unrecognized => panic!("{text:?} unrecognized"),
        }
    }

    #[test]
    fn key_phrase_turn_on() {
        let r = resolved("Home, turn on the lights");
        assert_eq!((r.app_name.as_str(), r.intent_name.as_str()), ("Home", "Turn on"));
        assert_eq!(r.matched_by, MatchedBy::KeyPhrase { phrase: "turn on".into() });
        assert_eq!(r.consumed, [0, 1, 2, 3].into_iter().collect());
    }

    #[test]
    fn identical_sample_has_zero_distance() {
        let r = resolved("Home, Change temperature");
        assert_eq!(r.intent_name, "Set temperature");
        match r.matched_by {
            MatchedBy::SampleWmd { distance, .. } => assert!(distance.abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn paraphrase_without_prefix() {
        let r = resolved("I feel hot, limit heater till 20");
        assert_eq!((r.app_name.as_str(), r.intent_name.as_str()), ("Home", "Set temperature"));
        assert!(matches!(r.matched_by, MatchedBy::SampleWmd { .. }));
    }

    #[test]
    fn gibberish_unrecognized() {
        assert_eq!(run("Home, flibber jabber"), Resolution::Unrecognized);
        assert_eq!(run("Home,"), Resolution::Unrecognized);
    }

    #[test]
    fn prefix_restricts_search() {
        // "remind" belongs to Calendar only.
        assert_eq!(run("Home, remind me"), Resolution::Unrecognized);
        let r = resolved("calendar, remind 16th of November to meet Sasha");
        assert_eq!(r.app_name, "Calendar");
    }

    #[test]
    fn longest_key_phrase_wins() {
        // "set" and "set up" both occur; the two-word phrase is kept.
        let (reg, store) = fixtures();
        let en = EnglishModel::new();
        let tokens = en.tokenize("Home, set up flibber").unwrap();
        let cfg = EngineConfig { threshold: 1e-9, ..EngineConfig::default() };
        match resolve(&tokens, &reg, &cfg, &store, &en) {
            Resolution::Resolved(r) => {
                assert_eq!(r.matched_by, MatchedBy::KeyPhrase { phrase: "set up".into() })
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn threshold_scaling_keeps_choice() {
        let (reg, store) = fixtures();
        let en = EnglishModel::new();
        for text in ["Set up temperature at 25 degree", "I feel hot, limit heater till 20", "Calendar, remind"] {
            let tokens = en.tokenize(text).unwrap();
            let base = resolve(&tokens, &reg, &EngineConfig::default(), &store, &en);
            for k in [0.5, 3.0, 10.0] {
                let cfg = EngineConfig { threshold: k, ..EngineConfig::default() };
                let scaled = resolve(&tokens, &reg, &cfg, &store.scaled(k), &en);
                match (&base, &scaled) {
                    (Resolution::Resolved(a), Resolution::Resolved(b)) => {
                        assert_eq!((&a.app_name, &a.intent_name), (&b.app_name, &b.intent_name))
                    }
                    (a, b) => assert_eq!(a, b),
                }
            }
        }
    }
}
