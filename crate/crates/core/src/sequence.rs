//! Presentation sequences built from ranked results, and the onset/offset
//! event schedule used to synchronize acquisition with exposure.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::StimulusId;
use crate::retrieval::RankedResult;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SequenceError {
    #[error("requested {requested} items but only {available} results are available")]
    NotEnoughResults { requested: usize, available: usize },
    #[error("count must be positive")]
    ZeroCount,
    #[error("duration must be positive")]
    ZeroDuration,
    #[error("item {stimulus} on track {track} has zero duration")]
    EmptyItem { stimulus: StimulusId, track: String },
    #[error("track {track}: {first} overlaps {second}")]
    Overlap {
        track: String,
        first: StimulusId,
        second: StimulusId,
    },
    #[error("track {0}: items are not sorted by start")]
    Unsorted(String),
    #[error("total {stated} ms does not match item end {actual} ms")]
    TotalMismatch { stated: u64, actual: u64 },
    #[error("line {line}: {reason}")]
    Schedule { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SequenceItem {
    pub stimulus: StimulusId,
    pub track: String,
    pub start_ms: u64,
    pub duration_ms: u64,
}

impl SequenceItem {
    pub fn end_ms(&self) -> u64 {
        self.start_ms + self.duration_ms
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StimulusSequence {
    pub items: Vec<SequenceItem>,
    pub total_ms: u64,
}

fn total_of(items: &[SequenceItem]) -> u64 {
    items.iter().map(SequenceItem::end_ms).max().unwrap_or(0)
}

impl StimulusSequence {
    /// Sorts items by (start, track, stimulus), recomputes the total and
    /// validates the result.
    pub fn from_items(mut items: Vec<SequenceItem>) -> Result<Self, SequenceError> {
        items.sort_by(|a, b| {
            (a.start_ms, &a.track, &a.stimulus).cmp(&(b.start_ms, &b.track, &b.stimulus))
        });
        let seq = StimulusSequence {
            total_ms: total_of(&items),
            items,
        };
        seq.validate()?;
        Ok(seq)
    }

    /// Per-track intervals `[start, start + duration)` must be sorted and
    /// disjoint; tracks may overlap each other.
    pub fn validate(&self) -> Result<(), SequenceError> {
        let mut last: BTreeMap<&str, &SequenceItem> = BTreeMap::new();
        for item in &self.items {
            if item.duration_ms == 0 {
                return Err(SequenceError::EmptyItem {
                    stimulus: item.stimulus.clone(),
                    track: item.track.clone(),
                });
            }
            if let Some(prev) = last.get(item.track.as_str()) {
                if item.start_ms < prev.start_ms {
                    return Err(SequenceError::Unsorted(item.track.clone()));
                }
                if item.start_ms < prev.end_ms() {
                    return Err(SequenceError::Overlap {
                        track: item.track.clone(),
                        first: prev.stimulus.clone(),
                        second: item.stimulus.clone(),
                    });
                }
            }
            last.insert(&item.track, item);
        }
        let actual = total_of(&self.items);
        if actual != self.total_ms {
            return Err(SequenceError::TotalMismatch {
                stated: self.total_ms,
                actual,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sequence serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceParams {
    pub count: usize,
    pub duration_ms: u64,
    pub isi_ms: u64,
    pub track: String,
}

/// Takes the top `count` results in rank order; item `k` starts at
/// `k · (duration + isi)`.
pub fn build_sequence(
    results: &RankedResult,
    params: &SequenceParams,
) -> Result<StimulusSequence, SequenceError> {
    if params.count == 0 {
        return Err(SequenceError::ZeroCount);
    }
    if params.duration_ms == 0 {
        return Err(SequenceError::ZeroDuration);
    }
    if params.count > results.entries.len() {
        return Err(SequenceError::NotEnoughResults {
            requested: params.count,
            available: results.entries.len(),
        });
    }
    let step = params.duration_ms + params.isi_ms;
    let items = results
        .entries
        .iter()
        .take(params.count)
        .enumerate()
        .map(|(k, e)| SequenceItem {
            stimulus: e.stimulus.clone(),
            track: params.track.clone(),
            start_ms: k as u64 * step,
            duration_ms: params.duration_ms,
        })
        .collect();
    StimulusSequence::from_items(items)
}

/// Union of both item lists. Shared track labels are accepted as long as
/// their intervals stay disjoint.
pub fn merge_sequences(
    a: &StimulusSequence,
    b: &StimulusSequence,
) -> Result<StimulusSequence, SequenceError> {
    let items = a.items.iter().chain(&b.items).cloned().collect();
    StimulusSequence::from_items(items)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    // declared first so offsets sort before onsets at equal timestamps
    Offset,
    Onset,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Onset => "onset",
            EventKind::Offset => "offset",
        })
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "onset" => Ok(EventKind::Onset),
            "offset" => Ok(EventKind::Offset),
            _ => Err(format!("unknown event kind `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SyncEvent {
    pub timestamp_ms: u64,
    pub kind: EventKind,
    pub stimulus: StimulusId,
    pub track: String,
}

/// One onset and one offset per item, sorted by time; at equal times
/// offsets precede onsets, then track label, then stimulus.
pub fn emit_schedule(s: &StimulusSequence) -> Vec<SyncEvent> {
    let mut events: Vec<SyncEvent> = s
        .items
        .iter()
        .flat_map(|item| {
            [
                SyncEvent {
                    timestamp_ms: item.start_ms,
                    kind: EventKind::Onset,
                    stimulus: item.stimulus.clone(),
                    track: item.track.clone(),
                },
                SyncEvent {
                    timestamp_ms: item.end_ms(),
                    kind: EventKind::Offset,
                    stimulus: item.stimulus.clone(),
                    track: item.track.clone(),
                },
            ]
        })
        .collect();
    events.sort_by(|a, b| {
        (a.timestamp_ms, a.kind, &a.track, &a.stimulus).cmp(&(
            b.timestamp_ms,
            b.kind,
            &b.track,
            &b.stimulus,
        ))
    });
    events
}

/// `timestampMs<TAB>kind<TAB>track<TAB>stimulus` lines.
pub fn schedule_to_tsv(events: &[SyncEvent]) -> String {
    events
        .iter()
        .map(|e| {
            format!(
                "{}\t{}\t{}\t{}\n",
                e.timestamp_ms, e.kind, e.track, e.stimulus
            )
        })
        .collect()
}

pub fn parse_schedule(text: &str) -> Result<Vec<SyncEvent>, SequenceError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| SequenceError::Schedule {
            line: i + 1,
            reason,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        let [ts, kind, track, stimulus] = fields.as_slice() else {
            return Err(bad("expected 4 fields".into()));
        };
        out.push(SyncEvent {
            timestamp_ms: ts
                .parse()
                .map_err(|_| bad(format!("bad timestamp `{ts}`")))?,
            kind: kind.parse().map_err(bad)?,
            track: track.to_string(),
            stimulus: stimulus.parse().map_err(bad)?,
        });
    }
    Ok(out)
}

/// Rebuilds the item list from a schedule by pairing each onset with the
/// next offset of the same stimulus on the same track.
pub fn reconstruct_sequence(events: &[SyncEvent]) -> Result<StimulusSequence, SequenceError> {
    let mut open: BTreeMap<(&str, &StimulusId), Vec<u64>> = BTreeMap::new();
    let mut items = Vec::new();
    for (i, e) in events.iter().enumerate() {
        let key = (e.track.as_str(), &e.stimulus);
        match e.kind {
            EventKind::Onset => open.entry(key).or_default().push(e.timestamp_ms),
            EventKind::Offset => {
                let start = open
                    .get_mut(&key)
                    .and_then(|starts| (!starts.is_empty()).then(|| starts.remove(0)))
                    .ok_or_else(|| SequenceError::Schedule {
                        line: i + 1,
                        reason: format!("offset of {} without onset", e.stimulus),
                    })?;
                items.push(SequenceItem {
                    stimulus: e.stimulus.clone(),
                    track: e.track.clone(),
                    start_ms: start,
                    duration_ms: e.timestamp_ms.saturating_sub(start),
                });
            }
        }
    }
    if let Some(((track, stimulus), _)) = open.iter().find(|(_, s)| !s.is_empty()) {
        return Err(SequenceError::Schedule {
            line: events.len(),
            reason: format!("onset of {stimulus} on {track} never ends"),
        });
    }
    StimulusSequence::from_items(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::RankedEntry;
    use crate::similarity::Measure;

    fn results(n: usize) -> RankedResult {
        RankedResult {
            query: "concept:Spider".into(),
            measure: Measure::WuPalmer,
            entries: (0..n)
                .map(|i| RankedEntry {
                    stimulus: format!("IAPS/{}", 1200 + i).parse().unwrap(),
                    score: 1.0 - i as f64 / 10.0,
                })
                .collect(),
        }
    }

    fn params(count: usize, track: &str) -> SequenceParams {
        SequenceParams {
            count,
            duration_ms: 2000,
            isi_ms: 500,
            track: track.into(),
        }
    }

    #[test]
    fn three_item_spacing() {
        let s = build_sequence(&results(3), &params(3, "visual")).unwrap();
        let starts: Vec<u64> = s.items.iter().map(|i| i.start_ms).collect();
        assert_eq!(starts, [0, 2500, 5000]);
        assert_eq!(s.total_ms, 7000);
        let ts: Vec<u64> = emit_schedule(&s).iter().map(|e| e.timestamp_ms).collect();
        assert_eq!(ts, [0, 2000, 2500, 4500, 5000, 7000]);
    }

    #[test]
    fn single_item() {
        let s = build_sequence(&results(3), &params(1, "visual")).unwrap();
        assert_eq!(s.items.len(), 1);
        assert_eq!(s.items[0].start_ms, 0);
        assert_eq!(s.total_ms, 2000);
        let events = emit_schedule(&s);
        assert_eq!(events.len(), 2);
        assert_eq!(
            (events[0].kind, events[0].timestamp_ms),
            (EventKind::Onset, 0)
        );
        assert_eq!(
            (events[1].kind, events[1].timestamp_ms),
            (EventKind::Offset, 2000)
        );
    }

    #[test]
    fn too_many_requested() {
        assert_eq!(
            build_sequence(&results(3), &params(5, "visual")),
            Err(SequenceError::NotEnoughResults {
                requested: 5,
                available: 3
            })
        );
        assert_eq!(
            build_sequence(&results(3), &params(0, "visual")),
            Err(SequenceError::ZeroCount)
        );
    }

    #[test]
    fn cross_track_merge_and_same_track_overlap() {
        let visual = build_sequence(&results(3), &params(3, "visual")).unwrap();
        let auditory = build_sequence(&results(3), &params(3, "auditory")).unwrap();
        let merged = merge_sequences(&visual, &auditory).unwrap();
        assert_eq!(merged.items.len(), 6);
        assert_eq!(merged.total_ms, 7000);

        let err = merge_sequences(&visual, &visual).unwrap_err();
        assert!(matches!(err, SequenceError::Overlap { .. }), "{err}");

        assert_eq!(
            merge_sequences(&visual, &StimulusSequence::default()).unwrap(),
            visual
        );
    }

    #[test]
    fn shared_track_without_overlap_is_accepted() {
        let a = build_sequence(&results(1), &params(1, "visual")).unwrap();
        let mut later = a.clone();
        later.items[0].start_ms = 10_000;
        later.total_ms = 12_000;
        let merged = merge_sequences(&a, &later).unwrap();
        assert_eq!(merged.total_ms, 12_000);
    }

    #[test]
    fn offsets_precede_onsets_at_equal_time() {
        let mut p = params(2, "visual");
        p.isi_ms = 0;
        let events = emit_schedule(&build_sequence(&results(2), &p).unwrap());
        assert_eq!(events[1].timestamp_ms, 2000);
        assert_eq!(events[1].kind, EventKind::Offset);
        assert_eq!(events[2].kind, EventKind::Onset);
    }

    #[test]
    fn empty_schedule() {
        assert!(emit_schedule(&StimulusSequence::default()).is_empty());
    }

    #[test]
    fn schedule_reconstructs_items() {
        let visual = build_sequence(&results(3), &params(3, "visual")).unwrap();
        let auditory = build_sequence(&results(2), &params(2, "auditory")).unwrap();
        let merged = merge_sequences(&visual, &auditory).unwrap();
        let tsv = schedule_to_tsv(&emit_schedule(&merged));
        let parsed = parse_schedule(&tsv).unwrap();
        assert_eq!(reconstruct_sequence(&parsed).unwrap(), merged);
    }

    #[test]
    fn json_shape() {
        let s = build_sequence(&results(1), &params(1, "visual")).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
        assert_eq!(v["totalMs"], 2000);
        assert_eq!(v["items"][0]["stimulus"], "IAPS/1200");
        assert_eq!(v["items"][0]["startMs"], 0);
        assert_eq!(v["items"][0]["durationMs"], 2000);
        assert_eq!(v["items"][0]["track"], "visual");
    }
}
