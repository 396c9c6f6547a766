use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use log::warn;

use super::event::ActivityEvent;
use super::MS_PER_HOUR;
use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub lines: usize,
    pub malformed: usize,
    /// First few diagnostics, `line: message`.
    pub diagnostics: Vec<String>,
}

const MAX_DIAGNOSTICS: usize = 20;

/// Reads newline-delimited JSON activity events. Blank lines are skipped.
/// Malformed or invalid records are counted and skipped; more than 1% of them
/// fails the whole read.
pub fn read_events<R: BufRead>(reader: R) -> Result<(Vec<ActivityEvent>, IngestReport)> {
    let mut report = IngestReport::default();
    let mut events = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        report.lines += 1;
        let parsed =
            serde_json::from_str::<ActivityEvent>(trimmed).map_err(Error::from).and_then(|e| e.validate().map(|_| e));
        match parsed {
            Ok(e) => events.push(e),
            Err(e) => {
                report.malformed += 1;
                if report.diagnostics.len() < MAX_DIAGNOSTICS {
                    report.diagnostics.push(format!("{}: {e}", i + 1));
                }
            }
        }
    }
    if report.malformed * 100 > report.lines {
        return Err(Error::TooManyMalformed { malformed: report.malformed, total: report.lines });
    }
    if report.malformed > 0 {
        warn!("skipped {} malformed lines of {}", report.malformed, report.lines);
    }
    Ok((events, report))
}

pub fn write_events<W: Write>(mut writer: W, events: &[ActivityEvent]) -> Result<()> {
    for e in events {
        serde_json::to_writer(&mut writer, e)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Rule-based bot filter: a traveler with more than `max_events_per_hour` events
/// inside any one-hour window is dropped entirely.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct BotFilter {
    pub max_events_per_hour: usize,
}

impl Default for BotFilter {
    fn default() -> Self {
        BotFilter { max_events_per_hour: 500 }
    }
}

/// Returns the surviving events (original order) and the dropped traveler ids.
pub fn filter_bots(events: &[ActivityEvent], filter: BotFilter) -> (Vec<ActivityEvent>, BTreeSet<String>) {
    let mut times: HashMap<&str, Vec<i64>> = HashMap::new();
    for e in events {
        times.entry(&e.traveler_id).or_default().push(e.timestamp);
    }
    let mut dropped = BTreeSet::new();
    for (traveler, mut ts) in times {
        ts.sort_unstable();
        let mut lo = 0;
        for hi in 0..ts.len() {
            while ts[hi] - ts[lo] >= MS_PER_HOUR {
                lo += 1;
            }
            if hi - lo + 1 > filter.max_events_per_hour {
                dropped.insert(traveler.to_string());
                break;
            }
        }
    }
    let kept = events.iter().filter(|e| !dropped.contains(&e.traveler_id)).cloned().collect();
    (kept, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_malformed_lines() {
        let mut text = String::new();
        for i in 0..200 {
            text.push_str(&format!("{{\"traveler_id\":\"t\",\"ts\":{i},\"type\":\"view\",\"listing_id\":\"l\"}}\n"));
        }
        text.push_str("not json\n\n");
        let (events, report) = read_events(text.as_bytes()).unwrap();
        assert_eq!(events.len(), 200);
        assert_eq!(report.malformed, 1);
        assert_eq!(report.lines, 201);
        assert!(report.diagnostics[0].starts_with("201:"));
    }

    #[test]
    fn fails_above_one_percent() {
        let text = "{\"traveler_id\":\"t\",\"ts\":1,\"type\":\"view\",\"listing_id\":\"l\"}\n{\"traveler_id\":\"t\",\"ts\":2,\"type\":\"view\"}\n";
        assert!(matches!(read_events(text.as_bytes()), Err(Error::TooManyMalformed { malformed: 1, total: 2 })));
    }

    #[test]
    fn write_then_read() {
        let events =
            vec![ActivityEvent::search("a", 1, Some("d")), ActivityEvent::booking("a", 2, "l", Some("d"), 12.25)];
        let mut buf = Vec::new();
        write_events(&mut buf, &events).unwrap();
        let (back, _) = read_events(buf.as_slice()).unwrap();
        assert_eq!(back, events);
    }

    #[test]
    fn drops_bursty_travelers() {
        let mut events: Vec<_> = (0..501).map(|i| ActivityEvent::view("bot", i * 7000, "l", None)).collect();
        events.extend((0..600).map(|i| ActivityEvent::view("human", i * 8000, "l", None)));
        let (kept, dropped) = filter_bots(&events, BotFilter::default());
        assert_eq!(dropped.into_iter().collect::<Vec<_>>(), vec!["bot".to_string()]);
        assert_eq!(kept.len(), 600);
    }
}
