//! Rolling train/score windows: train on the trailing year, score the next
//! quarter, shift by a quarter.

use crate::time::{Timestamp, SECONDS_PER_DAY};

pub const TRAIN_DAYS: i64 = 365;
pub const SCORE_DAYS: i64 = 91;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub train_start: Timestamp,
    pub train_end: Timestamp,
    pub score_start: Timestamp,
    pub score_end: Timestamp,
    /// The final window also scores shots stamped exactly at `score_end`.
    pub closed_end: bool,
}

impl Window {
    pub fn trains_on(&self, t: Timestamp) -> bool {
        self.train_start <= t && t < self.train_end
    }

    pub fn scores(&self, t: Timestamp) -> bool {
        self.score_start <= t && (t < self.score_end || (self.closed_end && t == self.score_end))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WindowSchedule {
    pub windows: Vec<Window>,
    pub warning: Option<String>,
}

impl WindowSchedule {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Index of the window scoring `t`, if any.
    pub fn window_for(&self, t: Timestamp) -> Option<usize> {
        self.windows.iter().position(|w| w.scores(t))
    }
}

pub fn build_schedule(first: Timestamp, last: Timestamp) -> WindowSchedule {
    build_schedule_with(first, last, TRAIN_DAYS, SCORE_DAYS)
}

pub fn build_schedule_with(
    first: Timestamp,
    last: Timestamp,
    train_days: i64,
    score_days: i64,
) -> WindowSchedule {
    let train = train_days * SECONDS_PER_DAY;
    let score = score_days * SECONDS_PER_DAY;
    let span = last.seconds() - first.seconds();
    if train <= 0 || score <= 0 {
        return WindowSchedule {
            windows: Vec::new(),
            warning: Some("schedule spans must be positive".into()),
        };
    }
    if span <= train {
        return WindowSchedule {
            windows: Vec::new(),
            warning: Some(format!(
                "corpus spans {:.1} days; at least {train_days} are needed before anything can be scored",
                span as f64 / SECONDS_PER_DAY as f64
            )),
        };
    }
    let count = (span - train + score - 1) / score;
    let windows = (0..count)
        .map(|i| {
            let score_start = Timestamp(first.seconds() + train + i * score);
            let is_last = i + 1 == count;
            let score_end = if is_last {
                last
            } else {
                Timestamp(score_start.seconds() + score)
            };
            Window {
                train_start: Timestamp(score_start.seconds() - train),
                train_end: score_start,
                score_start,
                score_end,
                closed_end: is_last,
            }
        })
        .collect();
    WindowSchedule {
        windows,
        warning: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn day(d: i64) -> Timestamp {
        Timestamp::from_days(d)
    }

    #[test]
    fn one_quarter_after_a_year() {
        let s = build_schedule(day(0), day(456));
        assert_eq!(s.len(), 1);
        let w = s.windows[0];
        assert_eq!((w.train_start, w.train_end), (day(0), day(365)));
        assert_eq!((w.score_start, w.score_end), (day(365), day(456)));
        assert!(w.scores(day(456)));
        assert!(!w.scores(day(364)));
    }

    #[test]
    fn exactly_a_year_has_nothing_to_score() {
        let s = build_schedule(day(0), day(365));
        assert!(s.is_empty());
        assert!(s.warning.is_some());
        assert!(build_schedule(day(0), day(10)).warning.is_some());
    }

    #[test]
    fn second_window_shifts_by_a_quarter() {
        let s = build_schedule(day(0), day(365 + 2 * 91));
        assert_eq!(s.len(), 2);
        let w = s.windows[1];
        assert_eq!((w.train_start, w.train_end), (day(91), day(456)));
        assert_eq!(w.score_start, day(456));
        assert!(!s.windows[0].closed_end && w.closed_end);
    }

    #[test]
    fn windows_partition_the_scored_timeline() {
        let s = build_schedule(day(0), Timestamp(day(1000).seconds() + 17));
        for t in (day(365).seconds()..=day(1000).seconds() + 17).step_by(3_607) {
            let hits = s.windows.iter().filter(|w| w.scores(Timestamp(t))).count();
            assert_eq!(hits, 1, "t={t}");
        }
        let last = s.windows.last().unwrap();
        assert!(last.score_end.seconds() - last.score_start.seconds() <= 91 * SECONDS_PER_DAY);
        assert_eq!(s.window_for(day(100)), None);
    }
}
