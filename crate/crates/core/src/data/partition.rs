use std::collections::BTreeSet;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use super::series::DemandSeries;

/// Meteorological season (DJF / MAM / JJA / SON).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Season {
    Winter,
    Spring,
    Summer,
    Fall,
}

impl Season {
    pub const ALL: [Season; 4] = [Season::Winter, Season::Spring, Season::Summer, Season::Fall];

    pub fn of(date: NaiveDate) -> Season {
        match date.month() {
            12 | 1 | 2 => Season::Winter,
            3..=5 => Season::Spring,
            6..=8 => Season::Summer,
            _ => Season::Fall,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayType {
    Working,
    Nonworking,
}

/// Dates treated as non-working in addition to weekends.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HolidayCalendar {
    dates: BTreeSet<NaiveDate>,
}

fn nth_weekday(year: i32, month: u32, weekday: Weekday, n: u8) -> NaiveDate {
    NaiveDate::from_weekday_of_month_opt(year, month, weekday, n).expect("valid nth weekday")
}

fn last_weekday(year: i32, month: u32, weekday: Weekday) -> NaiveDate {
    let next_month = if month == 12 {
        NaiveDate::from_ymd_opt(year + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(year, month + 1, 1)
    }
    .expect("valid date");
    let mut d = next_month - Duration::days(1);
    while d.weekday() != weekday {
        d -= Duration::days(1);
    }
    d
}

/// Saturday holidays are observed on Friday, Sunday holidays on Monday.
fn observed(d: NaiveDate) -> NaiveDate {
    match d.weekday() {
        Weekday::Sat => d - Duration::days(1),
        Weekday::Sun => d + Duration::days(1),
        _ => d,
    }
}

impl HolidayCalendar {
    pub fn new(dates: impl IntoIterator<Item = NaiveDate>) -> Self {
        Self {
            dates: dates.into_iter().collect(),
        }
    }

    /// US federal holidays (observed dates) for the given years.
    pub fn us_federal(years: impl IntoIterator<Item = i32>) -> Self {
        let mut dates = BTreeSet::new();
        for y in years {
            let fixed = |m, d| observed(NaiveDate::from_ymd_opt(y, m, d).expect("valid date"));
            dates.insert(fixed(1, 1));
            dates.insert(nth_weekday(y, 1, Weekday::Mon, 3));
            dates.insert(nth_weekday(y, 2, Weekday::Mon, 3));
            dates.insert(last_weekday(y, 5, Weekday::Mon));
            if y >= 2021 {
                dates.insert(fixed(6, 19));
            }
            dates.insert(fixed(7, 4));
            dates.insert(nth_weekday(y, 9, Weekday::Mon, 1));
            dates.insert(nth_weekday(y, 10, Weekday::Mon, 2));
            dates.insert(fixed(11, 11));
            dates.insert(nth_weekday(y, 11, Weekday::Thu, 4));
            dates.insert(fixed(12, 25));
        }
        Self { dates }
    }

    pub fn is_holiday(&self, date: NaiveDate) -> bool {
        self.dates.contains(&date)
    }

    pub fn day_type(&self, date: NaiveDate) -> DayType {
        match date.weekday() {
            Weekday::Sat | Weekday::Sun => DayType::Nonworking,
            _ if self.is_holiday(date) => DayType::Nonworking,
            _ => DayType::Working,
        }
    }

    pub fn dates(&self) -> impl Iterator<Item = &NaiveDate> {
        self.dates.iter()
    }
}

/// Slot indices of one season × day-type cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetPartition {
    pub season: Season,
    pub day_type: DayType,
    pub indices: Vec<usize>,
}

impl DatasetPartition {
    pub fn contains(&self, slot: usize) -> bool {
        self.indices.binary_search(&slot).is_ok()
    }

    /// Keeps only slots strictly before `end`.
    pub fn before(&self, end: usize) -> DatasetPartition {
        DatasetPartition {
            season: self.season,
            day_type: self.day_type,
            indices: self.indices.iter().copied().filter(|&i| i < end).collect(),
        }
    }
}

/// Splits the `normal` slots of `feeder` into the 8 season × day-type cells,
/// in the order winter/working, winter/nonworking, spring/working, ...
pub fn partition(feeder: &DemandSeries, calendar: &HolidayCalendar) -> Vec<DatasetPartition> {
    let mut parts: Vec<DatasetPartition> = Season::ALL
        .iter()
        .flat_map(|&season| {
            [DayType::Working, DayType::Nonworking]
                .into_iter()
                .map(move |day_type| DatasetPartition {
                    season,
                    day_type,
                    indices: Vec::new(),
                })
        })
        .collect();
    for i in 0..feeder.len() {
        if !feeder.is_normal(i) {
            continue;
        }
        let date = feeder.timestamp(i).date_naive();
        let s = Season::of(date) as usize;
        let d = calendar.day_type(date) as usize;
        parts[s * 2 + d].indices.push(i);
    }
    parts
}

/// The partition cell a given date falls into.
pub fn cell_of(date: NaiveDate, calendar: &HolidayCalendar) -> (Season, DayType) {
    (Season::of(date), calendar.day_type(date))
}
