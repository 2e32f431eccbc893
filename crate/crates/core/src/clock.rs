//! Service-day clock: integer seconds since midnight. Times after midnight
//! keep counting past 24:00:00, as in GTFS.

pub type Time = u32;
pub type Duration = u32;

/// Sentinel for "never" / unreachable.
pub const INFINITY: Time = Time::MAX;

pub const MINUTE: Duration = 60;
pub const HOUR: Duration = 3600;

/// Builds a time from hours and minutes, e.g. `hm(8, 25)`.
pub const fn hm(hours: u32, minutes: u32) -> Time {
    hours * HOUR + minutes * MINUTE
}

/// Parses `H:MM`, `HH:MM` or `HH:MM:SS`. Hours may exceed 23.
pub fn parse_clock(s: &str) -> Option<Time> {
    let mut parts = s.trim().split(':');
    let h: u32 = parts.next()?.trim().parse().ok()?;
    let m: u32 = parts.next()?.parse().ok()?;
    let sec: u32 = match parts.next() {
        Some(p) => p.parse().ok()?,
        None => 0,
    };
    if parts.next().is_some() || m >= 60 || sec >= 60 {
        return None;
    }
    h.checked_mul(HOUR)?.checked_add(m * MINUTE + sec)
}

pub fn format_clock(t: Time) -> String {
    if t == INFINITY {
        return "inf".to_string();
    }
    format!("{:02}:{:02}:{:02}", t / HOUR, (t % HOUR) / MINUTE, t % MINUTE)
}
