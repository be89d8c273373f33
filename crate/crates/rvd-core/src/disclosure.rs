//! Coordinated-disclosure case tracking and the 90-day deadline arithmetic.
//!
//! A case starts `private` when the vendor is first contacted; the public
//! disclosure deadline is exactly 90 calendar days later (proleptic
//! Gregorian, leap-aware). Cases move `private -> reported -> fixed ->
//! disclosed`, with `reported -> disclosed` also legal for deadline-forced
//! disclosure. A case is overdue when unresolved past its deadline; the
//! deadline day itself is not overdue.

use alloc::borrow::ToOwned;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Days between first vendor contact and public disclosure.
pub const DISCLOSURE_WINDOW_DAYS: i64 = 90;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DateError {
    #[error("{0:?} is not an ISO calendar date (YYYY-MM-DD)")]
    Format(String),
    #[error("{year:04}-{month:02}-{day:02} is not a real calendar date")]
    Invalid { year: i32, month: u8, day: u8 },
    #[error("date arithmetic left the supported year range 0000-9999")]
    OutOfRange,
}

/// An ISO 8601 calendar date, proleptic Gregorian, years 0000-9999.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Date {
    year: i32,
    month: u8,
    day: u8,
}

pub fn is_leap_year(year: i32) -> bool {
    year % 4 == 0 && (year % 100 != 0 || year % 400 == 0)
}

pub fn days_in_month(year: i32, month: u8) -> u8 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            if is_leap_year(year) {
                29
            } else {
                28
            }
        }
        _ => 0,
    }
}

impl Date {
    pub fn new(year: i32, month: u8, day: u8) -> Result<Date, DateError> {
        if !(0..=9999).contains(&year)
            || !(1..=12).contains(&month)
            || day < 1
            || day > days_in_month(year, month)
        {
            return Err(DateError::Invalid { year, month, day });
        }
        Ok(Date { year, month, day })
    }

    /// Strict `YYYY-MM-DD`.
    pub fn parse_iso(s: &str) -> Result<Date, DateError> {
        let bad = || DateError::Format(s.to_owned());
        let bytes = s.as_bytes();
        if bytes.len() != 10 || bytes[4] != b'-' || bytes[7] != b'-' {
            return Err(bad());
        }
        let digits = |range: core::ops::Range<usize>| -> Result<i32, DateError> {
            let part = &s[range];
            if !part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            part.parse::<i32>().map_err(|_| bad())
        };
        let year = digits(0..4)?;
        let month = digits(5..7)? as u8;
        let day = digits(8..10)? as u8;
        Date::new(year, month, day)
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn month(&self) -> u8 {
        self.month
    }

    pub fn day(&self) -> u8 {
        self.day
    }

    /// Days since 1970-01-01 (negative before it). Standard civil-calendar
    /// conversion over 400-year eras.
    pub fn day_number(&self) -> i64 {
        let y = i64::from(self.year) - i64::from(self.month <= 2);
        let era = if y >= 0 { y } else { y - 399 } / 400;
        let yoe = y - era * 400;
        let m = i64::from(self.month);
        let d = i64::from(self.day);
        let doy = (153 * (m + if m > 2 { -3 } else { 9 }) + 2) / 5 + d - 1;
        let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        era * 146_097 + doe - 719_468
    }

    /// Inverse of [`day_number`].
    ///
    /// [`day_number`]: Date::day_number
    pub fn from_day_number(days: i64) -> Result<Date, DateError> {
        let z = days + 719_468;
        let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
        let doe = z - era * 146_097;
        let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
        let y = yoe + era * 400;
        let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        let mp = (5 * doy + 2) / 153;
        let d = (doy - (153 * mp + 2) / 5 + 1) as u8;
        let m = (if mp < 10 { mp + 3 } else { mp - 9 }) as u8;
        let year = y + i64::from(m <= 2);
        if !(0..=9999).contains(&year) {
            return Err(DateError::OutOfRange);
        }
        Date::new(year as i32, m, d)
    }

    pub fn add_days(&self, days: i64) -> Result<Date, DateError> {
        Date::from_day_number(self.day_number() + days)
    }

    /// Signed day difference `self - other`.
    pub fn days_since(&self, other: &Date) -> i64 {
        self.day_number() - other.day_number()
    }

    pub fn format_iso(&self) -> String {
        format!("{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

impl core::fmt::Display for Date {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

/// Public disclosure deadline: exactly 90 calendar days after the first
/// vendor contact.
pub fn compute_deadline(contacted: Date) -> Result<Date, DateError> {
    contacted.add_days(DISCLOSURE_WINDOW_DAYS)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseState {
    Private,
    Reported,
    Fixed,
    Disclosed,
}

impl CaseState {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseState::Private => "private",
            CaseState::Reported => "reported",
            CaseState::Fixed => "fixed",
            CaseState::Disclosed => "disclosed",
        }
    }

    pub fn from_name(s: &str) -> Option<CaseState> {
        match s {
            "private" => Some(CaseState::Private),
            "reported" => Some(CaseState::Reported),
            "fixed" => Some(CaseState::Fixed),
            "disclosed" => Some(CaseState::Disclosed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseEvent {
    Report,
    Fix,
    Disclose,
}

impl CaseEvent {
    pub fn as_str(&self) -> &'static str {
        match self {
            CaseEvent::Report => "report",
            CaseEvent::Fix => "fix",
            CaseEvent::Disclose => "disclose",
        }
    }
}

/// A vendor-communication timeline for one record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DisclosureCase {
    pub record_id: u64,
    pub vendor_contacted_on: Date,
    pub state: CaseState,
    pub deadline: Date,
    pub disclosed_on: Option<Date>,
}

impl DisclosureCase {
    /// Opens a private case; the deadline is derived from the contact date.
    pub fn open(record_id: u64, vendor_contacted_on: Date) -> Result<DisclosureCase, DateError> {
        Ok(DisclosureCase {
            record_id,
            vendor_contacted_on,
            state: CaseState::Private,
            deadline: compute_deadline(vendor_contacted_on)?,
            disclosed_on: None,
        })
    }

    /// Unresolved past the deadline; the deadline day itself is on time.
    pub fn is_overdue(&self, today: Date) -> bool {
        self.state != CaseState::Disclosed && self.deadline < today
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransitionError {
    #[error("cannot apply {event:?} to a case in state {from:?}")]
    Illegal { from: CaseState, event: CaseEvent },
}

/// Advances a case along `private -> reported -> fixed -> disclosed`;
/// `disclose` is also legal straight from `reported` (deadline-forced
/// publication without a fix). `disclose` records the disclosure date.
pub fn transition(
    case: &DisclosureCase,
    event: CaseEvent,
    on: Date,
) -> Result<DisclosureCase, TransitionError> {
    let mut next = case.clone();
    match (case.state, event) {
        (CaseState::Private, CaseEvent::Report) => next.state = CaseState::Reported,
        (CaseState::Reported, CaseEvent::Fix) => next.state = CaseState::Fixed,
        (CaseState::Reported, CaseEvent::Disclose) | (CaseState::Fixed, CaseEvent::Disclose) => {
            next.state = CaseState::Disclosed;
            next.disclosed_on = Some(on);
        }
        (from, event) => return Err(TransitionError::Illegal { from, event }),
    }
    Ok(next)
}

/// Cases that are unresolved past their deadline, sorted by deadline
/// ascending (ties by record id).
pub fn overdue_cases(cases: &[DisclosureCase], today: Date) -> Vec<DisclosureCase> {
    let mut overdue: Vec<DisclosureCase> = cases
        .iter()
        .filter(|c| c.is_overdue(today))
        .cloned()
        .collect();
    overdue.sort_by_key(|c| (c.deadline, c.record_id));
    overdue
}

// ---- case line format ----

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CaseLineError {
    #[error("expected 5 comma-separated fields, got {0}")]
    FieldCount(usize),
    #[error("bad record id {0:?}")]
    BadId(String),
    #[error("unknown state {0:?}")]
    BadState(String),
    #[error(transparent)]
    BadDate(#[from] DateError),
    #[error("stored deadline {stored} does not match contact date + 90 days ({computed})")]
    DeadlineMismatch { stored: Date, computed: Date },
    #[error("disclosed case without a disclosure date")]
    MissingDisclosedOn,
}

/// `record_id,contacted,state,deadline,disclosed_on` with an empty last
/// field when the case is not yet disclosed.
pub fn render_case_line(case: &DisclosureCase) -> String {
    format!(
        "{},{},{},{},{}",
        case.record_id,
        case.vendor_contacted_on,
        case.state.as_str(),
        case.deadline,
        case.disclosed_on
            .map(|d| d.to_string())
            .unwrap_or_default()
    )
}

/// Parses one case line, recomputing and checking the stored deadline.
pub fn parse_case_line(line: &str) -> Result<DisclosureCase, CaseLineError> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 5 {
        return Err(CaseLineError::FieldCount(fields.len()));
    }
    let record_id: u64 = fields[0]
        .parse()
        .map_err(|_| CaseLineError::BadId(fields[0].to_owned()))?;
    let vendor_contacted_on = Date::parse_iso(fields[1])?;
    let state =
        CaseState::from_name(fields[2]).ok_or_else(|| CaseLineError::BadState(fields[2].to_owned()))?;
    let stored_deadline = Date::parse_iso(fields[3])?;
    let computed = compute_deadline(vendor_contacted_on)?;
    if stored_deadline != computed {
        return Err(CaseLineError::DeadlineMismatch {
            stored: stored_deadline,
            computed,
        });
    }
    let disclosed_on = if fields[4].is_empty() {
        None
    } else {
        Some(Date::parse_iso(fields[4])?)
    };
    if state == CaseState::Disclosed && disclosed_on.is_none() {
        return Err(CaseLineError::MissingDisclosedOn);
    }
    Ok(DisclosureCase {
        record_id,
        vendor_contacted_on,
        state,
        deadline: stored_deadline,
        disclosed_on,
    })
}
