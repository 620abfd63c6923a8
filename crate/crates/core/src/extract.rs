//! Value extraction: at most one date, one number, and one free-text string
//! per utterance.
//!
//! Extraction runs in a fixed order (date, then number, then string). Each
//! stage claims the tokens it used, and later stages skip claimed tokens, so
//! the `16th` in `16th of November` is read as part of a date and never as a
//! number.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::lang::Token;

/// Words dropped from the front of a residual string capture.
pub const CONNECTOR_WORDS: [&str; 2] = ["to", "that"];

static ORDINAL: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\d{1,2})(st|nd|rd|th)$").unwrap());
static CARDINAL_DAY: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d{1,2}$").unwrap());
static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^-?\d+(\.\d+)?$").unwrap());

pub type TokenMask = BTreeSet<usize>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumberValue {
    pub value: f64,
    pub surface: String,
    pub tokens: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateValue {
    /// Resolved calendar date.
    pub canonical: NaiveDate,
    pub surface: String,
    /// Claimed tokens; may include a leading `on` that the surface omits.
    pub tokens: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StringCapture {
    pub surface: String,
    pub tokens: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractedValues {
    pub number: Option<NumberValue>,
    pub date: Option<DateValue>,
    pub claimed: TokenMask,
}

/// Runs date extraction, then number extraction, accumulating claims.
pub fn extract_values(tokens: &[Token], raw: &str, reference: NaiveDate) -> ExtractedValues {
    extract_selected(tokens, raw, reference, true, true)
}

/// Like [`extract_values`], skipping the stages that are not wanted.
pub fn extract_selected(
    tokens: &[Token],
    raw: &str,
    reference: NaiveDate,
    want_date: bool,
    want_number: bool,
) -> ExtractedValues {
    let mut out = ExtractedValues::default();
    if want_date {
        if let Some(date) = extract_date(tokens, raw, reference) {
            out.claimed.extend(date.tokens.iter().copied());
            out.date = Some(date);
        }
    }
    if want_number {
        if let Some(number) = extract_number(tokens, &out.claimed) {
            out.claimed.extend(number.tokens.iter().copied());
            out.number = Some(number);
        }
    }
    out
}

fn month_of(word: &str) -> Option<u32> {
    let m = match word {
        "january" | "jan" => 1,
        "february" | "feb" => 2,
        "march" | "mar" => 3,
        "april" | "apr" => 4,
        "may" => 5,
        "june" | "jun" => 6,
        "july" | "jul" => 7,
        "august" | "aug" => 8,
        "september" | "sep" | "sept" => 9,
        "october" | "oct" => 10,
        "november" | "nov" => 11,
        "december" | "dec" => 12,
        _ => return None,
    };
    Some(m)
}

fn weekday_of(word: &str) -> Option<Weekday> {
    let d = match word {
        "monday" => Weekday::Mon,
        "tuesday" => Weekday::Tue,
        "wednesday" => Weekday::Wed,
        "thursday" => Weekday::Thu,
        "friday" => Weekday::Fri,
        "saturday" => Weekday::Sat,
        "sunday" => Weekday::Sun,
        _ => return None,
    };
    Some(d)
}

fn day_number(word: &str, allow_cardinal: bool) -> Option<u32> {
    if let Some(caps) = ORDINAL.captures(word) {
        return caps[1].parse().ok();
    }
    if allow_cardinal && CARDINAL_DAY.is_match(word) {
        return word.parse().ok();
    }
    None
}

/// Next occurrence of `weekday` strictly after `reference`.
pub fn next_weekday(reference: NaiveDate, weekday: Weekday) -> NaiveDate {
    let ahead = (7 + weekday.num_days_from_monday() - reference.weekday().num_days_from_monday()) % 7;
    let ahead = if ahead == 0 { 7 } else { ahead };
    reference + Days::new(ahead as u64)
}

/// First date on or after `reference` with the given month and day.
fn next_month_day(reference: NaiveDate, month: u32, day: u32) -> Option<NaiveDate> {
    (0..8).find_map(|offset| {
        NaiveDate::from_ymd_opt(reference.year() + offset, month, day).filter(|d| *d >= reference)
    })
}

fn slice(raw: &str, tokens: &[Token], first: usize, last: usize) -> String {
    raw[tokens[first].span.0..tokens[last].span.1].to_string()
}

/// Finds the first date expression reading left to right.
///
/// Recognized: `today`, `tomorrow`, weekday names (an `on` in front is
/// claimed but left out of the surface), `<ordinal> of <month>`, and
/// `<month> <ordinal|cardinal>`.
pub fn extract_date(tokens: &[Token], raw: &str, reference: NaiveDate) -> Option<DateValue> {
    let word = |i: usize| tokens.get(i).map(|t| t.normalized.as_str()).unwrap_or("");
    for i in 0..tokens.len() {
        if tokens[i].is_punct {
            continue;
        }
        let w = word(i);
        let found = match w {
            "today" => Some((reference, i, i)),
            "tomorrow" => Some((reference + Days::new(1), i, i)),
            _ => None,
        }
        .or_else(|| weekday_of(w).map(|d| (next_weekday(reference, d), i, i)))
        .or_else(|| {
            let day = day_number(w, false)?;
            if word(i + 1) != "of" {
                return None;
            }
            let month = month_of(word(i + 2))?;
            next_month_day(reference, month, day).map(|d| (d, i, i + 2))
        })
        .or_else(|| {
            let month = month_of(w)?;
            let day = day_number(word(i + 1), true)?;
            next_month_day(reference, month, day).map(|d| (d, i, i + 1))
        });

        if let Some((canonical, first, last)) = found {
            let mut claimed: Vec<usize> = (first..=last).collect();
            if first > 0 && word(first - 1) == "on" {
                claimed.insert(0, first - 1);
            }
            return Some(DateValue {
                canonical,
                surface: slice(raw, tokens, first, last),
                tokens: claimed,
            });
        }
    }
    None
}

/// First unclaimed cardinal number (`25`, `-3`, `2.5`), reading left to right.
pub fn extract_number(tokens: &[Token], claimed: &TokenMask) -> Option<NumberValue> {
    tokens.iter().enumerate().find_map(|(i, t)| {
        if claimed.contains(&i) || t.is_punct || !NUMBER.is_match(&t.normalized) {
            return None;
        }
        let value: f64 = t.normalized.parse().ok()?;
        Some(NumberValue { value, surface: t.surface.clone(), tokens: vec![i] })
    })
}

/// Captures a free-text value from the tokens nobody else claimed.
///
/// With a `pattern`, the first match inside a run of free tokens wins,
/// widened to whole tokens. Without one, the longest run of free tokens is
/// taken, with punctuation trimmed from both ends and leading connector words
/// dropped.
pub fn capture_string(
    tokens: &[Token],
    raw: &str,
    claimed: &TokenMask,
    consumed: &TokenMask,
    pattern: Option<&Regex>,
) -> Option<StringCapture> {
    let runs = free_runs(tokens, claimed, consumed);
    match pattern {
        Some(re) => runs.into_iter().find_map(|(first, last)| {
            let base = tokens[first].span.0;
            let text = &raw[base..tokens[last].span.1];
            let m = re.find_iter(text).find(|m| !m.as_str().trim().is_empty())?;
            let (start, end) = (base + m.start(), base + m.end());
            let covered: Vec<usize> = (first..=last)
                .filter(|&i| tokens[i].span.1 > start && tokens[i].span.0 < end)
                .collect();
            let (&a, &b) = (covered.first()?, covered.last()?);
            Some(StringCapture { surface: slice(raw, tokens, a, b), tokens: covered })
        }),
        None => runs
            .into_iter()
            .filter_map(|(mut first, mut last)| {
                while first <= last && tokens[last].is_punct {
                    if last == 0 {
                        return None;
                    }
                    last -= 1;
                }
                while first <= last
                    && (tokens[first].is_punct
                        || CONNECTOR_WORDS.contains(&tokens[first].normalized.as_str()))
                {
                    first += 1;
                }
                (first <= last).then_some((first, last))
            })
            .fold(None, |best: Option<(usize, usize)>, run| match best {
                Some(b) if b.1 - b.0 >= run.1 - run.0 => Some(b),
                _ => Some(run),
            })
            .map(|(first, last)| StringCapture {
                surface: slice(raw, tokens, first, last),
                tokens: (first..=last).collect(),
            }),
    }
}

/// Maximal runs `(first, last)` of tokens that are neither claimed nor consumed.
fn free_runs(tokens: &[Token], claimed: &TokenMask, consumed: &TokenMask) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start: Option<usize> = None;
    for i in 0..=tokens.len() {
        let free = i < tokens.len() && !claimed.contains(&i) && !consumed.contains(&i);
        match (free, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    runs
}
